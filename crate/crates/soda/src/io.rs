//! Versioned JSON file formats.
//!
//! - Market files (`"format": "soda-market/1"`): hospitals with capacities
//!   and full rankings, singles and couples with preference lists, optional
//!   generation metadata.
//! - Matching files (`"format": "soda-matching/1"`): singles keyed by doctor
//!   id, couples by index, `null` for unassigned.
//! - Trace exports: JSON lines, one record per eviction/placement/restart.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::SodaTrace;
use crate::influence::InfluenceTree;
use crate::market::{Couple, DoctorId, Hospital, HospitalId, MarketInstance, MarketMeta, Single};
use crate::matching::{validate_matching, Matching, MatchingViolation};

pub const MARKET_FORMAT: &str = "soda-market/1";
pub const MATCHING_FORMAT: &str = "soda-matching/1";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: expected format \"{expected}\", found \"{found}\"")]
    WrongFormat {
        path: String,
        expected: String,
        found: String,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn parse_err(path: &Path, e: &serde_json::Error) -> IoError {
    IoError::Parse {
        path: path.display().to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

fn file_err(path: &Path, source: std::io::Error) -> IoError {
    IoError::File {
        path: path.display().to_string(),
        source,
    }
}

fn invalid(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Invalid {
        path: path.display().to_string(),
        message: message.into(),
    }
}

#[derive(Serialize, Deserialize)]
struct HospitalFile {
    id: u32,
    capacity: u32,
    ranking: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct SingleFile {
    id: u32,
    prefs: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct CoupleFile {
    first: u32,
    second: u32,
    prefs: Vec<(u32, u32)>,
}

#[derive(Serialize, Deserialize)]
struct MarketFile {
    format: String,
    hospitals: Vec<HospitalFile>,
    singles: Vec<SingleFile>,
    couples: Vec<CoupleFile>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    params: Option<MarketMeta>,
}

pub fn market_to_json(m: &MarketInstance) -> String {
    let file = MarketFile {
        format: MARKET_FORMAT.to_string(),
        hospitals: m
            .hospitals()
            .iter()
            .enumerate()
            .map(|(id, h)| HospitalFile {
                id: id as u32,
                capacity: h.capacity,
                ranking: h.ranking.iter().map(|d| d.0).collect(),
            })
            .collect(),
        singles: m
            .singles()
            .iter()
            .map(|s| SingleFile {
                id: s.id.0,
                prefs: s.prefs.iter().map(|h| h.0).collect(),
            })
            .collect(),
        couples: m
            .couples()
            .iter()
            .map(|c| CoupleFile {
                first: c.first.0,
                second: c.second.0,
                prefs: c.prefs.iter().map(|&(a, b)| (a.0, b.0)).collect(),
            })
            .collect(),
        params: m.params.clone(),
    };
    serde_json::to_string_pretty(&file).expect("market serialization is infallible")
}

pub fn write_market(m: &MarketInstance, path: &Path) -> Result<(), IoError> {
    std::fs::write(path, market_to_json(m)).map_err(|e| file_err(path, e))
}

pub fn read_market(path: &Path) -> Result<MarketInstance, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| file_err(path, e))?;
    market_from_json(&text, path)
}

pub fn market_from_json(text: &str, path: &Path) -> Result<MarketInstance, IoError> {
    let file: MarketFile = serde_json::from_str(text).map_err(|e| parse_err(path, &e))?;
    if file.format != MARKET_FORMAT {
        return Err(IoError::WrongFormat {
            path: path.display().to_string(),
            expected: MARKET_FORMAT.to_string(),
            found: file.format,
        });
    }
    let mut hospitals_sorted = file.hospitals;
    hospitals_sorted.sort_by_key(|h| h.id);
    for (expected, h) in hospitals_sorted.iter().enumerate() {
        if h.id != expected as u32 {
            return Err(invalid(
                path,
                format!("hospital ids must be dense from 0; found {}", h.id),
            ));
        }
    }
    let hospitals = hospitals_sorted
        .into_iter()
        .map(|h| Hospital {
            capacity: h.capacity,
            ranking: h.ranking.into_iter().map(DoctorId).collect(),
        })
        .collect();
    let singles = file
        .singles
        .into_iter()
        .map(|s| Single {
            id: DoctorId(s.id),
            prefs: s.prefs.into_iter().map(HospitalId).collect(),
        })
        .collect();
    let couples = file
        .couples
        .into_iter()
        .map(|c| Couple {
            first: DoctorId(c.first),
            second: DoctorId(c.second),
            prefs: c
                .prefs
                .into_iter()
                .map(|(a, b)| (HospitalId(a), HospitalId(b)))
                .collect(),
        })
        .collect();
    MarketInstance::new(hospitals, singles, couples, file.params)
        .map_err(|e| invalid(path, e.to_string()))
}

#[derive(Serialize, Deserialize)]
struct CouplePairFile {
    pair: Option<(u32, u32)>,
}

#[derive(Serialize, Deserialize)]
struct MatchingFile {
    format: String,
    singles: BTreeMap<String, Option<u32>>,
    couples: Vec<CouplePairFile>,
}

pub fn matching_to_json(m: &MarketInstance, mu: &Matching) -> String {
    let file = MatchingFile {
        format: MATCHING_FORMAT.to_string(),
        singles: m
            .singles()
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.0.to_string(), mu.single_assignment(i).map(|h| h.0)))
            .collect(),
        couples: (0..m.couples().len())
            .map(|i| CouplePairFile {
                pair: mu.couple_assignment(i).map(|(a, b)| (a.0, b.0)),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("matching serialization is infallible")
}

pub fn write_matching(m: &MarketInstance, mu: &Matching, path: &Path) -> Result<(), IoError> {
    std::fs::write(path, matching_to_json(m, mu)).map_err(|e| file_err(path, e))
}

/// Parse and structurally validate a matching against its market.
pub fn read_matching(m: &MarketInstance, path: &Path) -> Result<Matching, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| file_err(path, e))?;
    matching_from_json(m, &text, path)
}

pub fn matching_from_json(
    m: &MarketInstance,
    text: &str,
    path: &Path,
) -> Result<Matching, IoError> {
    let file: MatchingFile = serde_json::from_str(text).map_err(|e| parse_err(path, &e))?;
    if file.format != MATCHING_FORMAT {
        return Err(IoError::WrongFormat {
            path: path.display().to_string(),
            expected: MATCHING_FORMAT.to_string(),
            found: file.format,
        });
    }
    if file.couples.len() != m.couples().len() {
        return Err(invalid(
            path,
            format!(
                "expected {} couple entries, found {}",
                m.couples().len(),
                file.couples.len()
            ),
        ));
    }
    let mut singles = vec![None; m.singles().len()];
    let mut seen = vec![false; m.singles().len()];
    for (key, assignment) in &file.singles {
        let id: u32 = key
            .parse()
            .map_err(|_| invalid(path, format!("singles key {key:?} is not a doctor id")))?;
        let idx = m
            .singles()
            .iter()
            .position(|s| s.id.0 == id)
            .ok_or_else(|| invalid(path, format!("doctor {id} is not a single in this market")))?;
        if seen[idx] {
            return Err(invalid(path, format!("doctor {id} is assigned twice")));
        }
        seen[idx] = true;
        singles[idx] = assignment.map(HospitalId);
    }
    if let Some(missing) = seen.iter().position(|&s| !s) {
        return Err(invalid(
            path,
            format!(
                "single {} has no entry in the matching file",
                m.singles()[missing].id.0
            ),
        ));
    }
    for h in singles.iter().flatten() {
        if h.0 as usize >= m.n_hospitals() {
            return Err(invalid(path, format!("unknown hospital id {}", h.0)));
        }
    }
    let couples: Vec<Option<(HospitalId, HospitalId)>> = file
        .couples
        .iter()
        .map(|c| c.pair.map(|(a, b)| (HospitalId(a), HospitalId(b))))
        .collect();
    for pair in couples.iter().flatten() {
        if pair.0 .0 as usize >= m.n_hospitals() || pair.1 .0 as usize >= m.n_hospitals() {
            return Err(invalid(
                path,
                "unknown hospital id in couple assignment".to_string(),
            ));
        }
    }
    let mu = Matching::from_assignments(m, singles, couples);
    let violations: Vec<MatchingViolation> = validate_matching(m, &mu);
    if !violations.is_empty() {
        let lines: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(invalid(path, lines.join("; ")));
    }
    Ok(mu)
}

/// Trace export: JSON lines with a shared step counter — restart records
/// (with the new order), then the final pass's evictions and placements.
pub fn trace_to_jsonl(trace: &SodaTrace) -> String {
    #[derive(Serialize)]
    struct Record<'a> {
        step: usize,
        phase: &'a str,
        #[serde(skip_serializing_if = "Option::is_none")]
        evictor: Option<u32>,
        #[serde(skip_serializing_if = "Option::is_none")]
        evicted: Option<u32>,
        #[serde(skip_serializing_if = "Option::is_none")]
        doctor: Option<u32>,
        #[serde(skip_serializing_if = "Option::is_none")]
        hospital: Option<u32>,
        #[serde(skip_serializing_if = "Option::is_none")]
        permutation: Option<&'a [u32]>,
    }
    let mut out = String::new();
    let mut step = 0usize;
    let mut push = |record: &Record<'_>| {
        let _ = writeln!(
            out,
            "{}",
            serde_json::to_string(record).expect("trace record")
        );
    };
    for r in &trace.restarts {
        push(&Record {
            step,
            phase: "restart",
            evictor: Some(r.moved),
            evicted: Some(r.ahead_of),
            doctor: None,
            hospital: None,
            permutation: Some(&r.permutation),
        });
        step += 1;
    }
    for e in &trace.evictions {
        push(&Record {
            step,
            phase: match e.phase {
                crate::engine::Phase::CoupleApplication => "couple-application",
                crate::engine::Phase::Stabilize => "stabilize",
            },
            evictor: Some(e.evictor),
            evicted: Some(e.evicted.0),
            doctor: None,
            hospital: Some(e.hospital.0),
            permutation: None,
        });
        step += 1;
    }
    for p in &trace.placements {
        push(&Record {
            step,
            phase: "placement",
            evictor: Some(p.by_couple),
            evicted: None,
            doctor: Some(p.doctor.0),
            hospital: Some(p.hospital.0),
            permutation: None,
        });
        step += 1;
    }
    out
}

/// Influence-tree export: a JSON forest, one object per couple.
pub fn trees_to_json(trees: &[InfluenceTree]) -> String {
    serde_json::to_string_pretty(trees).expect("tree serialization is infallible")
}
