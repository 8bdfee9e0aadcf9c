//! Classic libpcap file reader (microsecond timestamps, either byte order).

use serde::{Deserialize, Serialize};

use super::CaptureError;

const MAGIC: u32 = 0xA1B2_C3D4;
const MAGIC_SWAPPED: u32 = 0xD4C3_B2A1;
const GLOBAL_HEADER_LEN: usize = 24;
const RECORD_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LinkType {
    Ethernet,
    Other(u32),
}

impl From<u32> for LinkType {
    fn from(code: u32) -> Self {
        match code {
            1 => Self::Ethernet,
            other => Self::Other(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaptureRecord {
    /// Seconds since the epoch, microsecond resolution.
    pub timestamp: f64,
    pub orig_len: u32,
    pub data: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Capture {
    pub link_type: LinkType,
    pub snaplen: u32,
    pub records: Vec<CaptureRecord>,
    /// Trailing records dropped because the file ended inside them.
    pub truncated_records: usize,
}

#[derive(Clone, Copy)]
enum Endian {
    Big,
    Little,
}

impl Endian {
    fn u32_at(self, b: &[u8], at: usize) -> u32 {
        let raw = [b[at], b[at + 1], b[at + 2], b[at + 3]];
        match self {
            Endian::Big => u32::from_be_bytes(raw),
            Endian::Little => u32::from_le_bytes(raw),
        }
    }
}

pub fn parse_capture(bytes: &[u8]) -> Result<Capture, CaptureError> {
    if bytes.len() < 4 {
        return Err(CaptureError::TruncatedHeader { len: bytes.len() });
    }
    let endian = match u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) {
        MAGIC => Endian::Big,
        MAGIC_SWAPPED => Endian::Little,
        other => return Err(CaptureError::BadMagic { magic: other }),
    };
    if bytes.len() < GLOBAL_HEADER_LEN {
        return Err(CaptureError::TruncatedHeader { len: bytes.len() });
    }
    let snaplen = endian.u32_at(bytes, 16);
    let link_type = LinkType::from(endian.u32_at(bytes, 20));

    let mut records = Vec::new();
    let mut truncated_records = 0;
    let mut pos = GLOBAL_HEADER_LEN;
    while pos < bytes.len() {
        if bytes.len() - pos < RECORD_HEADER_LEN {
            truncated_records += 1;
            break;
        }
        let ts_sec = endian.u32_at(bytes, pos);
        let ts_usec = endian.u32_at(bytes, pos + 4);
        let incl_len = endian.u32_at(bytes, pos + 8) as usize;
        let orig_len = endian.u32_at(bytes, pos + 12);
        let start = pos + RECORD_HEADER_LEN;
        if bytes.len() - start < incl_len {
            truncated_records += 1;
            break;
        }
        records.push(CaptureRecord {
            timestamp: ts_sec as f64 + ts_usec as f64 * 1e-6,
            orig_len,
            data: bytes[start..start + incl_len].to_vec(),
        });
        pos = start + incl_len;
    }
    if truncated_records > 0 {
        log::warn!("dropped {truncated_records} truncated trailing capture record(s)");
    }
    Ok(Capture {
        link_type,
        snaplen,
        records,
        truncated_records,
    })
}

/// Serialize records as a big-endian classic capture. Used for synthetic
/// corpora and tests.
pub fn write_capture(link_type: LinkType, records: &[CaptureRecord]) -> Vec<u8> {
    let code = match link_type {
        LinkType::Ethernet => 1,
        LinkType::Other(c) => c,
    };
    let mut out = Vec::with_capacity(GLOBAL_HEADER_LEN + records.iter().map(|r| 16 + r.data.len()).sum::<usize>());
    out.extend_from_slice(&MAGIC.to_be_bytes());
    out.extend_from_slice(&2u16.to_be_bytes());
    out.extend_from_slice(&4u16.to_be_bytes());
    out.extend_from_slice(&0i32.to_be_bytes());
    out.extend_from_slice(&0u32.to_be_bytes());
    out.extend_from_slice(&65535u32.to_be_bytes());
    out.extend_from_slice(&code.to_be_bytes());
    for r in records {
        let sec = r.timestamp.floor();
        let usec = ((r.timestamp - sec) * 1e6).round() as u32;
        out.extend_from_slice(&(sec as u32).to_be_bytes());
        out.extend_from_slice(&usec.min(999_999).to_be_bytes());
        out.extend_from_slice(&(r.data.len() as u32).to_be_bytes());
        out.extend_from_slice(&r.orig_len.max(r.data.len() as u32).to_be_bytes());
        out.extend_from_slice(&r.data);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header_be(link: u32) -> Vec<u8> {
        let mut h = vec![0xA1, 0xB2, 0xC3, 0xD4, 0, 2, 0, 4];
        h.extend_from_slice(&[0; 8]);
        h.extend_from_slice(&65535u32.to_be_bytes());
        h.extend_from_slice(&link.to_be_bytes());
        h
    }

    #[test]
    fn empty_capture() {
        let cap = parse_capture(&header_be(1)).unwrap();
        assert!(cap.records.is_empty());
        assert_eq!(cap.link_type, LinkType::Ethernet);
        assert_eq!(cap.truncated_records, 0);
    }

    #[test]
    fn one_record_big_endian() {
        let mut b = header_be(1);
        b.extend_from_slice(&[0, 0, 0, 10, 0, 0, 0, 5, 0, 0, 0, 60, 0, 0, 0, 60]);
        b.extend(std::iter::repeat_n(0xAB, 60));
        let cap = parse_capture(&b).unwrap();
        assert_eq!(cap.records.len(), 1);
        assert_eq!(cap.records[0].data.len(), 60);
        assert!((cap.records[0].timestamp - 10.000005).abs() < 1e-9);
    }

    #[test]
    fn one_record_little_endian() {
        let mut b = vec![0xD4, 0xC3, 0xB2, 0xA1, 2, 0, 4, 0];
        b.extend_from_slice(&[0; 8]);
        b.extend_from_slice(&[0xFF, 0xFF, 0, 0, 1, 0, 0, 0]);
        b.extend_from_slice(&[1, 0, 0, 0, 0, 0, 0, 0, 0x3C, 0, 0, 0, 0x3C, 0, 0, 0]);
        b.extend(std::iter::repeat_n(0u8, 60));
        let cap = parse_capture(&b).unwrap();
        assert_eq!(cap.records.len(), 1);
        assert_eq!(cap.records[0].data.len(), 60);
        assert_eq!(cap.link_type, LinkType::Ethernet);
    }

    #[test]
    fn bad_magic_and_short_header() {
        assert!(matches!(
            parse_capture(&[0u8; 24]),
            Err(CaptureError::BadMagic { magic: 0 })
        ));
        assert!(matches!(
            parse_capture(&header_be(1)[..20]),
            Err(CaptureError::TruncatedHeader { len: 20 })
        ));
        assert!(matches!(
            parse_capture(&[0xA1, 0xB2]),
            Err(CaptureError::TruncatedHeader { len: 2 })
        ));
    }

    #[test]
    fn truncated_trailing_record_is_dropped() {
        let mut b = header_be(1);
        b.extend_from_slice(&[0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 4, 0, 0, 0, 4, 1, 2, 3, 4]);
        b.extend_from_slice(&[0, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0, 40, 0, 0, 0, 40, 9, 9]);
        let cap = parse_capture(&b).unwrap();
        assert_eq!(cap.records.len(), 1);
        assert_eq!(cap.truncated_records, 1);

        let mut partial_header = header_be(1);
        partial_header.extend_from_slice(&[0, 0, 0]);
        assert_eq!(parse_capture(&partial_header).unwrap().truncated_records, 1);
    }

    /// Independent walk over record headers: count records by hopping
    /// 16 + incl_len without materializing frames.
    fn walk_count(b: &[u8]) -> usize {
        let mut pos = 24;
        let mut n = 0;
        while pos + 16 <= b.len() {
            let incl = u32::from_be_bytes([b[pos + 8], b[pos + 9], b[pos + 10], b[pos + 11]]) as usize;
            if pos + 16 + incl > b.len() {
                break;
            }
            pos += 16 + incl;
            n += 1;
        }
        n
    }

    proptest::proptest! {
        #[test]
        fn record_count_matches_header_walk(
            lens in proptest::collection::vec(0usize..200, 0..20),
            cut in 0usize..64,
        ) {
            let records: Vec<CaptureRecord> = lens.iter().enumerate().map(|(i, &n)| CaptureRecord {
                timestamp: i as f64,
                orig_len: n as u32,
                data: vec![i as u8; n],
            }).collect();
            let mut bytes = write_capture(LinkType::Ethernet, &records);
            let keep = bytes.len().saturating_sub(cut).max(24);
            bytes.truncate(keep);
            let cap = parse_capture(&bytes).unwrap();
            proptest::prop_assert_eq!(cap.records.len(), walk_count(&bytes));
            for (got, want) in cap.records.iter().zip(&records) {
                proptest::prop_assert_eq!(&got.data, &want.data);
            }
        }
    }
}
