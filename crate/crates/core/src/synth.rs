//! Synthetic data for tests, benchmarks and smoke runs.

use std::net::{Ipv4Addr, Ipv6Addr};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::capture::{write_capture, CaptureRecord, LinkType, SynthFrame, SynthNetwork, SynthTransport};
use crate::features::SessionMatrix;
use crate::nncore::Tensor2;

/// `classes × per_class` sessions of shape `seq_len × features`. Each class
/// has a random centroid in [0, 1]^F; every row is the centroid plus
/// Gaussian noise with standard deviation `noise`.
pub fn separable_dataset(
    classes: usize,
    per_class: usize,
    seq_len: usize,
    features: usize,
    noise: f64,
    seed: u64,
) -> Vec<SessionMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centroids: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..features).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let jitter = Normal::new(0.0, noise).expect("finite noise");
    let mut out = Vec::with_capacity(classes * per_class);
    for s in 0..per_class {
        for (c, centroid) in centroids.iter().enumerate() {
            let data = (0..seq_len)
                .flat_map(|_| {
                    centroid
                        .iter()
                        .map(|&m| m + jitter.sample(&mut rng))
                        .collect::<Vec<_>>()
                })
                .collect();
            out.push(SessionMatrix {
                values: Tensor2::from_vec(seq_len, features, data).expect("sized"),
                label: c,
                device_name: format!("class{c:02}"),
                session_id: format!("s{s:02}"),
            });
        }
    }
    out
}

/// A pcap corpus laid out like the Aalto setup captures.
pub struct SyntheticCorpus {
    pub manifest: PathBuf,
    /// Packets per session, in manifest order.
    pub packet_counts: Vec<usize>,
    pub devices: usize,
    pub sessions_per_device: usize,
}

fn device_frame(device: usize, i: usize, rng: &mut ChaCha8Rng) -> SynthFrame {
    let mac = [0x02, 0, 0, 0, (device >> 8) as u8, device as u8];
    let gateway = [0x02, 0xff, 0, 0, 0, 1];
    let outbound = rng.gen_bool(0.6);
    let (src_mac, dst_mac) = if outbound { (mac, gateway) } else { (gateway, mac) };
    let dev_ip = Ipv4Addr::new(192, 168, 1, 10 + device as u8);
    let peer = Ipv4Addr::new(10, 0, (device % 7) as u8, 1);
    let (src, dst) = if outbound { (dev_ip, peer) } else { (peer, dev_ip) };
    let kind = (device + i + rng.gen_range(0..3)) % 6;
    let (network, transport) = match kind {
        0 => (SynthNetwork::Arp, None),
        1 | 2 => (
            SynthNetwork::Ipv4 {
                src,
                dst,
                ttl: 64 - (device % 5) as u8,
            },
            Some(SynthTransport::Udp {
                src_port: 49152 + device as u16,
                dst_port: [53, 123, 5353, 1900][device % 4],
            }),
        ),
        3 | 4 => (
            SynthNetwork::Ipv4 {
                src,
                dst,
                ttl: 128 - (device % 3) as u8,
            },
            Some(SynthTransport::Tcp {
                src_port: 40000 + (device * 13 % 997) as u16,
                dst_port: [80, 443, 8883, 8080][device % 4],
                flags: [0x02, 0x12, 0x10, 0x18][i % 4],
                window: 1024 * (1 + device as u16 % 16),
            }),
        ),
        _ => (
            SynthNetwork::Ipv6 {
                src: Ipv6Addr::new(0xfe80, 0, 0, 0, 0, 0, 0, device as u16 + 1),
                dst: Ipv6Addr::new(0xff02, 0, 0, 0, 0, 0, 0, 0xfb),
                hop_limit: 255,
            },
            Some(SynthTransport::Icmp),
        ),
    };
    SynthFrame {
        src_mac,
        dst_mac,
        network,
        transport,
        payload_len: rng.gen_range(0..(40 + 20 * (device % 9))),
    }
}

/// Write `devices × sessions_per_device` pcaps plus `sessions.csv` under
/// `dir`. Device 0 always emits 11 packets per session, device 1 exactly 12,
/// the rest between 13 and 60.
pub fn write_aalto_profile(
    dir: &Path,
    devices: usize,
    sessions_per_device: usize,
    seed: u64,
) -> std::io::Result<SyntheticCorpus> {
    std::fs::create_dir_all(dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut manifest = String::from("file,device,session,device_mac\n");
    let mut packet_counts = Vec::with_capacity(devices * sessions_per_device);
    for d in 0..devices {
        let name = format!("device{d:02}");
        let mac = format!("02:00:00:00:{:02x}:{:02x}", (d >> 8) as u8, d as u8);
        for s in 0..sessions_per_device {
            let n = match d {
                0 => 11,
                1 => 12,
                _ => rng.gen_range(13..=60),
            };
            let mut t = 1_600_000_000.0 + (d * 1000 + s * 10) as f64;
            let records: Vec<CaptureRecord> = (0..n)
                .map(|i| {
                    t += rng.gen_range(0.001..0.5) * (1.0 + d as f64 / 10.0);
                    let data = device_frame(d, i, &mut rng).encode();
                    CaptureRecord {
                        timestamp: (t * 1e6).round() / 1e6,
                        orig_len: data.len() as u32,
                        data,
                    }
                })
                .collect();
            let file = format!("{name}_{s:02}.pcap");
            std::fs::write(dir.join(&file), write_capture(LinkType::Ethernet, &records))?;
            manifest.push_str(&format!("{file},{name},{s},{mac}\n"));
            packet_counts.push(n);
        }
    }
    let manifest_path = dir.join("sessions.csv");
    std::fs::write(&manifest_path, manifest)?;
    Ok(SyntheticCorpus {
        manifest: manifest_path,
        packet_counts,
        devices,
        sessions_per_device,
    })
}
