use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::capture::{
    Direction, IpVersion, RawPacket, ETHERTYPE_ARP, ETHERTYPE_IPV4, ETHERTYPE_IPV6, PROTO_ICMP, PROTO_ICMPV6,
};

/// A packet together with its predecessor in the same session.
pub struct PacketContext<'a> {
    pub packet: &'a RawPacket,
    pub prev: Option<&'a RawPacket>,
}

/// `None` means the field is absent for this packet; the manifest default
/// is used instead.
pub type Extractor = fn(&PacketContext) -> Option<f64>;

fn flag(b: bool) -> Option<f64> {
    Some(if b { 1.0 } else { 0.0 })
}

fn tcp_flag(ctx: &PacketContext, mask: u8) -> Option<f64> {
    ctx.packet.tcp_flags.map(|f| if f & mask != 0 { 1.0 } else { 0.0 })
}

fn port_class(port: Option<u16>, lo: u32, hi: u32) -> Option<f64> {
    port.map(|p| if (lo..=hi).contains(&(p as u32)) { 1.0 } else { 0.0 })
}

/// Every extractor a manifest may reference.
pub const EXTRACTORS: &[(&str, Extractor)] = &[
    ("packet_size", |c| Some(c.packet.wire_len as f64)),
    ("captured_size", |c| Some(c.packet.captured_len as f64)),
    ("payload_len", |c| Some(c.packet.payload_len as f64)),
    ("ip_header_len", |c| c.packet.ip_header_len.map(|v| v as f64)),
    ("interarrival", |c| {
        Some(c.prev.map_or(0.0, |p| (c.packet.timestamp - p.timestamp).max(0.0)))
    }),
    ("direction", |c| match c.packet.direction {
        Direction::FromDevice => Some(1.0),
        Direction::ToDevice => Some(-1.0),
        Direction::Unknown => None,
    }),
    ("ttl", |c| c.packet.ttl_or_hoplimit.map(f64::from)),
    ("ip_proto", |c| c.packet.ip_proto.map(f64::from)),
    ("proto_tcp", |c| flag(c.packet.is_tcp())),
    ("proto_udp", |c| flag(c.packet.is_udp())),
    ("proto_icmp", |c| {
        flag(matches!(c.packet.ip_proto, Some(PROTO_ICMP) | Some(PROTO_ICMPV6)))
    }),
    ("is_arp", |c| flag(c.packet.eth_type == Some(ETHERTYPE_ARP))),
    ("is_ipv4", |c| {
        flag(c.packet.eth_type == Some(ETHERTYPE_IPV4) && c.packet.ip_version == Some(IpVersion::V4))
    }),
    ("is_ipv6", |c| {
        flag(c.packet.eth_type == Some(ETHERTYPE_IPV6) && c.packet.ip_version == Some(IpVersion::V6))
    }),
    ("tcp_fin", |c| tcp_flag(c, 0x01)),
    ("tcp_syn", |c| tcp_flag(c, 0x02)),
    ("tcp_rst", |c| tcp_flag(c, 0x04)),
    ("tcp_psh", |c| tcp_flag(c, 0x08)),
    ("tcp_ack", |c| tcp_flag(c, 0x10)),
    ("tcp_window", |c| c.packet.tcp_window.map(f64::from)),
    ("src_port", |c| c.packet.src_port.map(f64::from)),
    ("dst_port", |c| c.packet.dst_port.map(f64::from)),
    ("src_port_wellknown", |c| port_class(c.packet.src_port, 0, 1023)),
    ("src_port_registered", |c| port_class(c.packet.src_port, 1024, 49151)),
    ("src_port_ephemeral", |c| port_class(c.packet.src_port, 49152, 65535)),
    ("dst_port_wellknown", |c| port_class(c.packet.dst_port, 0, 1023)),
    ("dst_port_registered", |c| port_class(c.packet.dst_port, 1024, 49151)),
    ("dst_port_ephemeral", |c| port_class(c.packet.dst_port, 49152, 65535)),
    ("is_broadcast", |c| flag(c.packet.is_broadcast)),
];

pub fn lookup_extractor(id: &str) -> Option<Extractor> {
    EXTRACTORS.iter().find(|(name, _)| *name == id).map(|(_, f)| *f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub name: String,
    pub extractor: String,
    #[serde(default)]
    pub default: f64,
}

/// Ordered per-packet feature definitions plus the sequence length `T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureManifest {
    pub name: String,
    pub seq_len: usize,
    pub features: Vec<FeatureDef>,
}

fn defs(ids: &[&str]) -> Vec<FeatureDef> {
    ids.iter()
        .map(|id| FeatureDef {
            name: id.to_string(),
            extractor: id.to_string(),
            default: 0.0,
        })
        .collect()
}

impl FeatureManifest {
    /// 25 header-derived features over the first 12 packets.
    pub fn iotdevid25() -> Self {
        Self {
            name: "iotdevid25".into(),
            seq_len: 12,
            features: defs(&[
                "packet_size",
                "payload_len",
                "ip_header_len",
                "interarrival",
                "direction",
                "ttl",
                "proto_tcp",
                "proto_udp",
                "proto_icmp",
                "is_arp",
                "is_ipv4",
                "is_ipv6",
                "tcp_syn",
                "tcp_ack",
                "tcp_fin",
                "tcp_rst",
                "tcp_psh",
                "tcp_window",
                "src_port_wellknown",
                "src_port_registered",
                "src_port_ephemeral",
                "dst_port_wellknown",
                "dst_port_registered",
                "dst_port_ephemeral",
                "is_broadcast",
            ]),
        }
    }

    /// Six raw header values over the first 20 packets of a flow.
    pub fn lopez6() -> Self {
        Self {
            name: "lopez6".into(),
            seq_len: 20,
            features: defs(&[
                "src_port",
                "dst_port",
                "payload_len",
                "tcp_window",
                "interarrival",
                "direction",
            ]),
        }
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "iotdevid25" => Some(Self::iotdevid25()),
            "lopez6" => Some(Self::lopez6()),
            _ => None,
        }
    }

    pub fn feature_count(&self) -> usize {
        self.features.len()
    }

    pub fn with_seq_len(mut self, seq_len: usize) -> Self {
        self.seq_len = seq_len;
        self
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.seq_len == 0 || self.features.is_empty() {
            return Err(FeatureError::InvalidManifest(
                "sequence length and feature count must be positive".into(),
            ));
        }
        let mut names = HashSet::new();
        for f in &self.features {
            if !names.insert(f.name.as_str()) {
                return Err(FeatureError::InvalidManifest(format!(
                    "duplicate feature name {:?}",
                    f.name
                )));
            }
            if lookup_extractor(&f.extractor).is_none() {
                return Err(FeatureError::UnknownExtractor(f.extractor.clone()));
            }
            if !f.default.is_finite() {
                return Err(FeatureError::InvalidManifest(format!(
                    "non-finite default for {:?}",
                    f.name
                )));
            }
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self, FeatureError> {
        let m: Self = serde_json::from_str(s).map_err(|e| FeatureError::InvalidManifest(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// A built-in name or a path to a JSON manifest file.
    pub fn resolve(name_or_path: &str) -> Result<Self, FeatureError> {
        if let Some(m) = Self::builtin(name_or_path) {
            return Ok(m);
        }
        let text = std::fs::read_to_string(name_or_path)
            .map_err(|e| FeatureError::InvalidManifest(format!("{name_or_path}: {e}")))?;
        Self::from_json(&text)
    }
}
