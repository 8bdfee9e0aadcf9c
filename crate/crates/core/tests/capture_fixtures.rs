use std::net::IpAddr;
use std::path::PathBuf;

use seqdevid_core::capture::{
    parse_capture, read_session_manifest, session_from_capture, Direction, IpVersion, LinkType,
};
use seqdevid_core::exec::Execution;
use seqdevid_core::features::{build_dataset, extract_features, FeatureManifest};

fn fixture(name: &str) -> Vec<u8> {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "fixtures", name].iter().collect();
    std::fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn arp_frame_reads_the_same_in_both_byte_orders() {
    let le = parse_capture(&fixture("arp_le.pcap")).unwrap();
    let be = parse_capture(&fixture("arp_be.pcap")).unwrap();
    assert_eq!(le, be);
    assert_eq!(le.link_type, LinkType::Ethernet);
    assert_eq!(le.records.len(), 1);
    let rec = &le.records[0];
    assert_eq!(rec.data.len(), 60);
    assert_eq!(rec.orig_len, 60);
    assert_eq!(rec.timestamp, 1_600_000_000.25);

    let s = session_from_capture(&fixture("arp_le.pcap"), "plug", "1", None).unwrap();
    let p = &s.packets[0];
    assert_eq!(p.eth_type, Some(0x0806));
    assert_eq!(p.payload_len, 46);
    assert_eq!(p.ip_version, None);
    assert_eq!(p.direction, Direction::Unknown);
}

#[test]
fn mixed_capture_decodes_every_layer() {
    let mac = "00:11:22:33:44:55".parse().unwrap();
    let s = session_from_capture(&fixture("mixed_le.pcap"), "cam", "7", Some(&mac)).unwrap();
    assert_eq!(s.packets.len(), 3);

    let udp = &s.packets[0];
    assert!(udp.is_udp());
    assert_eq!((udp.src_port, udp.dst_port), (Some(5353), Some(53)));
    assert_eq!(udp.ttl_or_hoplimit, Some(64));
    assert_eq!(udp.payload_len, 12);
    assert_eq!(udp.captured_len, 54);
    assert_eq!(udp.direction, Direction::FromDevice);

    let tcp = &s.packets[1];
    assert!(tcp.is_tcp());
    assert_eq!((tcp.src_port, tcp.dst_port), (Some(443), Some(50123)));
    assert_eq!(tcp.tcp_flags, Some(0x12));
    assert_eq!(tcp.tcp_window, Some(8192));
    assert_eq!(tcp.payload_len, 5);
    assert_eq!(tcp.ttl_or_hoplimit, Some(57));
    assert_eq!(tcp.timestamp, 1_600_000_001.5);
    assert_eq!(tcp.captured_len, 59);

    let v6 = &s.packets[2];
    assert_eq!(v6.ip_version, Some(IpVersion::V6));
    assert!(matches!(v6.src_ip, Some(IpAddr::V6(_))));
    assert_eq!(v6.ttl_or_hoplimit, Some(255));
    assert_eq!((v6.src_port, v6.dst_port), (Some(546), Some(547)));
    assert_eq!(v6.payload_len, 0);
    assert_eq!(v6.timestamp, 1_600_000_001.75);
    assert_eq!(v6.captured_len, 62);
}

#[test]
fn fixture_features_and_padding() {
    let manifest = FeatureManifest::iotdevid25();
    let s = session_from_capture(&fixture("mixed_le.pcap"), "cam", "7", None).unwrap();
    let vectors = extract_features(&s, &manifest).unwrap();
    assert_eq!(vectors.len(), 3);
    assert!(vectors.iter().all(|v| v.len() == 25));
    let col = |name: &str| manifest.features.iter().position(|f| f.name == name).unwrap();
    assert_eq!(vectors[0][col("packet_size")], 54.0);
    assert_eq!(vectors[1][col("proto_tcp")], 1.0);
    assert_eq!(vectors[1][col("tcp_syn")], 1.0);
    assert_eq!(vectors[1][col("tcp_ack")], 1.0);
    assert_eq!(vectors[1][col("tcp_fin")], 0.0);
    assert_eq!(vectors[2][col("is_ipv6")], 1.0);
    assert_eq!(vectors[2][col("interarrival")], 0.25);

    let (data, codec) = build_dataset(&[s], &manifest, Execution::Sequential).unwrap();
    assert_eq!(codec.names(), ["cam"]);
    let m = &data[0];
    assert_eq!(m.values.shape(), (12, 25));
    assert_eq!(m.valid_rows(), 3);
    assert!((3..12).all(|r| m.values.row(r).iter().all(|&v| v == 0.0)));
}

#[test]
fn manifest_tolerates_missing_mac_column() {
    let rows = read_session_manifest("file,device,session\na.pcap,plug,1\n".as_bytes()).unwrap();
    assert_eq!(rows[0].device_mac, None);
    assert!(read_session_manifest("file,session\na.pcap,1\n".as_bytes()).is_err());
}
