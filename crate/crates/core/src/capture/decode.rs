use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};

use serde::{Deserialize, Serialize};

use super::LinkType;

pub const ETH_HEADER_LEN: usize = 14;
pub const ETHERTYPE_IPV4: u16 = 0x0800;
pub const ETHERTYPE_ARP: u16 = 0x0806;
pub const ETHERTYPE_IPV6: u16 = 0x86DD;
pub const PROTO_ICMP: u8 = 1;
pub const PROTO_TCP: u8 = 6;
pub const PROTO_UDP: u8 = 17;
pub const PROTO_ICMPV6: u8 = 58;

pub type MacAddr = [u8; 6];
pub const BROADCAST_MAC: MacAddr = [0xFF; 6];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum IpVersion {
    V4,
    V6,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Direction {
    FromDevice,
    ToDevice,
    #[default]
    Unknown,
}

/// Reference point for [`Direction`]: the device's link or network address.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeviceAddr {
    Mac(MacAddr),
    Ip(IpAddr),
}

impl std::str::FromStr for DeviceAddr {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Ok(ip) = s.parse::<IpAddr>() {
            return Ok(Self::Ip(ip));
        }
        let parts: Vec<&str> = s.split([':', '-']).collect();
        if parts.len() == 6 {
            let mut mac = [0u8; 6];
            for (m, p) in mac.iter_mut().zip(&parts) {
                *m = u8::from_str_radix(p, 16).map_err(|_| format!("bad MAC address {s:?}"))?;
            }
            return Ok(Self::Mac(mac));
        }
        Err(format!("expected a MAC or IP address, got {s:?}"))
    }
}

/// Header fields decoded from one captured frame. Anything that could not be
/// decoded is `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawPacket {
    pub timestamp: f64,
    pub captured_len: usize,
    pub wire_len: usize,
    pub link_type: LinkType,
    pub src_mac: Option<MacAddr>,
    pub dst_mac: Option<MacAddr>,
    pub eth_type: Option<u16>,
    pub ip_version: Option<IpVersion>,
    pub ip_header_len: Option<usize>,
    pub ttl_or_hoplimit: Option<u8>,
    pub ip_proto: Option<u8>,
    pub src_ip: Option<IpAddr>,
    pub dst_ip: Option<IpAddr>,
    pub src_port: Option<u16>,
    pub dst_port: Option<u16>,
    pub tcp_flags: Option<u8>,
    pub tcp_window: Option<u16>,
    pub payload_len: usize,
    pub is_broadcast: bool,
    pub direction: Direction,
}

impl RawPacket {
    fn bare(timestamp: f64, captured_len: usize, wire_len: usize, link_type: LinkType) -> Self {
        Self {
            timestamp,
            captured_len,
            wire_len: wire_len.max(captured_len),
            link_type,
            src_mac: None,
            dst_mac: None,
            eth_type: None,
            ip_version: None,
            ip_header_len: None,
            ttl_or_hoplimit: None,
            ip_proto: None,
            src_ip: None,
            dst_ip: None,
            src_port: None,
            dst_port: None,
            tcp_flags: None,
            tcp_window: None,
            payload_len: captured_len,
            is_broadcast: false,
            direction: Direction::Unknown,
        }
    }

    /// Set `direction` relative to `device`.
    pub fn assign_direction(&mut self, device: Option<&DeviceAddr>) {
        self.direction = match device {
            Some(DeviceAddr::Mac(mac)) => match (self.src_mac, self.dst_mac) {
                (Some(s), _) if s == *mac => Direction::FromDevice,
                (_, Some(d)) if d == *mac => Direction::ToDevice,
                _ => Direction::Unknown,
            },
            Some(DeviceAddr::Ip(ip)) => match (self.src_ip, self.dst_ip) {
                (Some(s), _) if s == *ip => Direction::FromDevice,
                (_, Some(d)) if d == *ip => Direction::ToDevice,
                _ => Direction::Unknown,
            },
            None => Direction::Unknown,
        };
    }

    pub fn is_tcp(&self) -> bool {
        self.ip_proto == Some(PROTO_TCP)
    }

    pub fn is_udp(&self) -> bool {
        self.ip_proto == Some(PROTO_UDP)
    }
}

fn be16(b: &[u8], at: usize) -> u16 {
    u16::from_be_bytes([b[at], b[at + 1]])
}

/// Decode link, network and transport headers. Never fails: layers that
/// cannot be decoded leave their fields absent.
pub fn decode_frame(frame: &[u8], link_type: LinkType, ts: f64) -> RawPacket {
    decode_frame_with_wire_len(frame, frame.len(), link_type, ts)
}

pub fn decode_frame_with_wire_len(frame: &[u8], wire_len: usize, link_type: LinkType, ts: f64) -> RawPacket {
    let mut pkt = RawPacket::bare(ts, frame.len(), wire_len, link_type);
    if link_type != LinkType::Ethernet || frame.len() < ETH_HEADER_LEN {
        return pkt;
    }
    let dst: MacAddr = frame[0..6].try_into().expect("6 bytes");
    let src: MacAddr = frame[6..12].try_into().expect("6 bytes");
    let eth_type = be16(frame, 12);
    pkt.dst_mac = Some(dst);
    pkt.src_mac = Some(src);
    pkt.eth_type = Some(eth_type);
    pkt.is_broadcast = dst == BROADCAST_MAC;

    let mut consumed = ETH_HEADER_LEN;
    let l3 = &frame[ETH_HEADER_LEN..];
    let (proto, l4) = match eth_type {
        ETHERTYPE_IPV4 if l3.len() >= 20 && l3[0] >> 4 == 4 && (l3[0] & 0x0F) >= 5 => {
            let ihl = ((l3[0] & 0x0F) as usize * 4).min(l3.len());
            let proto = l3[9];
            let dst_ip = Ipv4Addr::new(l3[16], l3[17], l3[18], l3[19]);
            pkt.ip_version = Some(IpVersion::V4);
            pkt.ip_header_len = Some(ihl);
            pkt.ttl_or_hoplimit = Some(l3[8]);
            pkt.ip_proto = Some(proto);
            pkt.src_ip = Some(IpAddr::V4(Ipv4Addr::new(l3[12], l3[13], l3[14], l3[15])));
            pkt.dst_ip = Some(IpAddr::V4(dst_ip));
            pkt.is_broadcast |= dst_ip.is_broadcast();
            consumed += ihl;
            // non-first fragments carry no transport header
            let frag_offset = be16(l3, 6) & 0x1FFF;
            (if frag_offset == 0 { Some(proto) } else { None }, &l3[ihl..])
        }
        ETHERTYPE_IPV6 if l3.len() >= 40 && l3[0] >> 4 == 6 => {
            let proto = l3[6];
            let src: [u8; 16] = l3[8..24].try_into().expect("16 bytes");
            let dst: [u8; 16] = l3[24..40].try_into().expect("16 bytes");
            pkt.ip_version = Some(IpVersion::V6);
            pkt.ip_header_len = Some(40);
            pkt.ttl_or_hoplimit = Some(l3[7]);
            pkt.ip_proto = Some(proto);
            pkt.src_ip = Some(IpAddr::V6(Ipv6Addr::from(src)));
            pkt.dst_ip = Some(IpAddr::V6(Ipv6Addr::from(dst)));
            consumed += 40;
            (Some(proto), &l3[40..])
        }
        _ => (None, &l3[..0]),
    };

    match proto {
        Some(PROTO_TCP) if l4.len() >= 20 => {
            let data_offset = (l4[12] >> 4) as usize * 4;
            if data_offset >= 20 {
                pkt.src_port = Some(be16(l4, 0));
                pkt.dst_port = Some(be16(l4, 2));
                pkt.tcp_flags = Some(l4[13]);
                pkt.tcp_window = Some(be16(l4, 14));
                consumed += data_offset.min(l4.len());
            }
        }
        Some(PROTO_UDP) if l4.len() >= 8 => {
            pkt.src_port = Some(be16(l4, 0));
            pkt.dst_port = Some(be16(l4, 2));
            consumed += 8;
        }
        _ => {}
    }
    pkt.payload_len = frame.len().saturating_sub(consumed);
    pkt
}

/// Transport layer of a synthetic frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthTransport {
    Tcp {
        src_port: u16,
        dst_port: u16,
        flags: u8,
        window: u16,
    },
    Udp {
        src_port: u16,
        dst_port: u16,
    },
    Icmp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthNetwork {
    Ipv4 {
        src: Ipv4Addr,
        dst: Ipv4Addr,
        ttl: u8,
    },
    Ipv6 {
        src: Ipv6Addr,
        dst: Ipv6Addr,
        hop_limit: u8,
    },
    Arp,
}

/// Field values for building a synthetic Ethernet frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthFrame {
    pub src_mac: MacAddr,
    pub dst_mac: MacAddr,
    pub network: SynthNetwork,
    pub transport: Option<SynthTransport>,
    pub payload_len: usize,
}

impl SynthFrame {
    /// Encode as Ethernet bytes. Checksums are left zero.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(64 + self.payload_len);
        out.extend_from_slice(&self.dst_mac);
        out.extend_from_slice(&self.src_mac);

        let mut l4 = Vec::new();
        let proto = match self.transport {
            Some(SynthTransport::Tcp {
                src_port,
                dst_port,
                flags,
                window,
            }) => {
                l4.extend_from_slice(&src_port.to_be_bytes());
                l4.extend_from_slice(&dst_port.to_be_bytes());
                l4.extend_from_slice(&[0; 8]);
                l4.push(5 << 4);
                l4.push(flags);
                l4.extend_from_slice(&window.to_be_bytes());
                l4.extend_from_slice(&[0; 4]);
                PROTO_TCP
            }
            Some(SynthTransport::Udp { src_port, dst_port }) => {
                l4.extend_from_slice(&src_port.to_be_bytes());
                l4.extend_from_slice(&dst_port.to_be_bytes());
                l4.extend_from_slice(&((8 + self.payload_len) as u16).to_be_bytes());
                l4.extend_from_slice(&[0; 2]);
                PROTO_UDP
            }
            Some(SynthTransport::Icmp) => match self.network {
                SynthNetwork::Ipv6 { .. } => PROTO_ICMPV6,
                _ => PROTO_ICMP,
            },
            None => 253,
        };
        let body_len = l4.len() + self.payload_len;

        match self.network {
            SynthNetwork::Ipv4 { src, dst, ttl } => {
                out.extend_from_slice(&ETHERTYPE_IPV4.to_be_bytes());
                out.push(0x45);
                out.push(0);
                out.extend_from_slice(&((20 + body_len) as u16).to_be_bytes());
                out.extend_from_slice(&[0, 0, 0x40, 0]);
                out.push(ttl);
                out.push(proto);
                out.extend_from_slice(&[0, 0]);
                out.extend_from_slice(&src.octets());
                out.extend_from_slice(&dst.octets());
            }
            SynthNetwork::Ipv6 { src, dst, hop_limit } => {
                out.extend_from_slice(&ETHERTYPE_IPV6.to_be_bytes());
                out.extend_from_slice(&[0x60, 0, 0, 0]);
                out.extend_from_slice(&(body_len as u16).to_be_bytes());
                out.push(proto);
                out.push(hop_limit);
                out.extend_from_slice(&src.octets());
                out.extend_from_slice(&dst.octets());
            }
            SynthNetwork::Arp => {
                out.extend_from_slice(&ETHERTYPE_ARP.to_be_bytes());
            }
        }
        if !matches!(self.network, SynthNetwork::Arp) {
            out.extend_from_slice(&l4);
        }
        out.extend(std::iter::repeat_n(0x5A, self.payload_len));
        out
    }
}
