//! Capture ingestion: classic pcap files → decoded packets → labeled sessions.

mod decode;
mod ingest;
mod pcap;

pub use decode::{
    decode_frame, decode_frame_with_wire_len, DeviceAddr, Direction, IpVersion, MacAddr, RawPacket, SynthFrame,
    SynthNetwork, SynthTransport, BROADCAST_MAC, ETHERTYPE_ARP, ETHERTYPE_IPV4, ETHERTYPE_IPV6, ETH_HEADER_LEN,
    PROTO_ICMP, PROTO_ICMPV6, PROTO_TCP, PROTO_UDP,
};
pub use ingest::{
    ingest_sessions, ingest_sessions_with, read_session_manifest, read_session_manifest_file, session_from_capture,
    ManifestRow, SessionRecord,
};
pub use pcap::{parse_capture, write_capture, Capture, CaptureRecord, LinkType};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("not a classic capture file (magic {magic:#010x})")]
    BadMagic { magic: u32 },
    #[error("capture header truncated ({len} bytes)")]
    TruncatedHeader { len: usize },
    #[error("capture file missing: {}", path.display())]
    MissingFile { path: PathBuf },
    #[error("duplicate session {session:?} for device {device:?}")]
    DuplicateSession { device: String, session: String },
    #[error("capture {} contains no packets", path.display())]
    EmptySession { path: PathBuf },
    #[error("session manifest: {0}")]
    Manifest(String),
    #[error("{}: {source}", path.display())]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<CaptureError>,
    },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}
