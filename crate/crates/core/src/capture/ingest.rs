use std::collections::HashSet;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{decode_frame_with_wire_len, parse_capture, CaptureError, DeviceAddr, RawPacket};
use crate::exec::{map_ordered, Execution};

/// One device session: its packets in capture order.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionRecord {
    pub device_label: String,
    pub session_id: String,
    pub packets: Vec<RawPacket>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct ManifestRow {
    pub file: String,
    pub device: String,
    pub session: String,
    #[serde(default, deserialize_with = "empty_as_none")]
    pub device_mac: Option<String>,
}

fn empty_as_none<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Option<String>, D::Error> {
    let s: Option<String> = Option::deserialize(d)?;
    Ok(s.filter(|v| !v.trim().is_empty()))
}

/// Parse a session manifest (`file,device,session[,device_mac]`).
pub fn read_session_manifest<R: Read>(reader: R) -> Result<Vec<ManifestRow>, CaptureError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CaptureError::Manifest(e.to_string()))?
        .clone();
    for required in ["file", "device", "session"] {
        if !headers.iter().any(|h| h == required) {
            return Err(CaptureError::Manifest(format!("missing column {required:?}")));
        }
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize::<ManifestRow>().enumerate() {
        let row = rec.map_err(|e| CaptureError::Manifest(format!("row {}: {e}", i + 2)))?;
        if row.device.is_empty() {
            return Err(CaptureError::Manifest(format!("row {}: empty device label", i + 2)));
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_session_manifest_file(path: &Path) -> Result<Vec<ManifestRow>, CaptureError> {
    let f = std::fs::File::open(path).map_err(|source| CaptureError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_session_manifest(f)
}

/// Decode a whole capture into a session. Timestamps that run backwards are
/// clamped to their predecessor so packet order is preserved and
/// inter-arrival times stay non-negative.
pub fn session_from_capture(
    bytes: &[u8],
    device_label: &str,
    session_id: &str,
    device: Option<&DeviceAddr>,
) -> Result<SessionRecord, CaptureError> {
    let cap = parse_capture(bytes)?;
    let mut packets = Vec::with_capacity(cap.records.len());
    let mut last_ts = f64::NEG_INFINITY;
    for rec in &cap.records {
        let ts = rec.timestamp.max(last_ts);
        last_ts = ts;
        let mut pkt = decode_frame_with_wire_len(&rec.data, rec.orig_len as usize, cap.link_type, ts);
        pkt.assign_direction(device);
        packets.push(pkt);
    }
    Ok(SessionRecord {
        device_label: device_label.to_string(),
        session_id: session_id.to_string(),
        packets,
    })
}

pub fn ingest_sessions(manifest: &[ManifestRow], capture_root: &Path) -> Result<Vec<SessionRecord>, CaptureError> {
    ingest_sessions_with(manifest, capture_root, Execution::default())
}

/// Load every manifest row. Files are parsed concurrently under
/// [`Execution::Parallel`]; output order always follows the manifest.
pub fn ingest_sessions_with(
    manifest: &[ManifestRow],
    capture_root: &Path,
    exec: Execution,
) -> Result<Vec<SessionRecord>, CaptureError> {
    let mut seen = HashSet::new();
    for row in manifest {
        if !seen.insert((row.device.as_str(), row.session.as_str())) {
            return Err(CaptureError::DuplicateSession {
                device: row.device.clone(),
                session: row.session.clone(),
            });
        }
    }
    let mut resolved = Vec::with_capacity(manifest.len());
    for row in manifest {
        let path = capture_root.join(&row.file);
        if !path.is_file() {
            return Err(CaptureError::MissingFile { path });
        }
        let device = row
            .device_mac
            .as_deref()
            .map(str::parse::<DeviceAddr>)
            .transpose()
            .map_err(CaptureError::Manifest)?;
        resolved.push((row, path, device));
    }

    let results = map_ordered(
        exec,
        &resolved,
        |(row, path, device): &(&ManifestRow, PathBuf, Option<DeviceAddr>)| load_one(row, path, device.as_ref()),
    );
    results.into_iter().collect()
}

fn load_one(row: &ManifestRow, path: &Path, device: Option<&DeviceAddr>) -> Result<SessionRecord, CaptureError> {
    let bytes = std::fs::read(path).map_err(|source| CaptureError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let session =
        session_from_capture(&bytes, &row.device, &row.session, device).map_err(|e| CaptureError::InFile {
            path: path.to_path_buf(),
            source: Box::new(e),
        })?;
    if session.packets.is_empty() {
        return Err(CaptureError::EmptySession {
            path: path.to_path_buf(),
        });
    }
    Ok(session)
}
