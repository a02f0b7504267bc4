use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::features::{extract_features, FeatureVector, FEATURE_NAMES};
use super::label::ada_label;
use super::synth::PatientTrace;
use super::window::slide_windows;
use crate::{Error, Result, Severity};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Synthetic,
    External,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::Synthetic => "synthetic",
            Source::External => "external",
        })
    }
}

impl FromStr for Source {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthetic" => Ok(Source::Synthetic),
            "external" => Ok(Source::External),
            other => Err(Error::Parse {
                line: 0,
                msg: format!("unknown source {other:?}"),
            }),
        }
    }
}

/// Identifies a window by patient and start offset within that patient's trace.
/// Rendered as `p<patient>-w<index>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WindowId {
    pub patient: u32,
    pub index: u32,
}

impl fmt::Display for WindowId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "p{}-w{}", self.patient, self.index)
    }
}

impl FromStr for WindowId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse {
            line: 0,
            msg: format!("bad window_id {s:?}"),
        };
        let rest = s.strip_prefix('p').ok_or_else(bad)?;
        let (p, i) = rest.split_once("-w").ok_or_else(bad)?;
        Ok(WindowId {
            patient: p.parse().map_err(|_| bad())?,
            index: i.parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldRecord {
    pub features: FeatureVector,
    pub label: Severity,
    pub source: Source,
    pub window_id: WindowId,
}

/// Windows, features and labels for every trace.
pub fn build_gold(traces: &[PatientTrace], source: Source) -> Result<Vec<GoldRecord>> {
    let mut out = Vec::new();
    for tr in traces {
        for (start, w) in slide_windows(&tr.rows)? {
            out.push(GoldRecord {
                features: extract_features(&w)?,
                label: ada_label(&w),
                source,
                window_id: WindowId {
                    patient: tr.patient,
                    index: start as u32,
                },
            });
        }
    }
    Ok(out)
}

fn header() -> Vec<&'static str> {
    let mut h: Vec<&str> = FEATURE_NAMES.to_vec();
    h.extend(["label", "source", "window_id"]);
    h
}

pub fn write_gold<W: Write>(w: W, records: &[GoldRecord]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(header())?;
    let mut row: Vec<String> = Vec::with_capacity(13);
    for r in records {
        row.clear();
        // `{}` on f64 is the shortest representation that round-trips
        row.extend(r.features.0.iter().map(|x| x.to_string()));
        row.push(r.label.index().to_string());
        row.push(r.source.to_string());
        row.push(r.window_id.to_string());
        wr.write_record(&row)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_gold<R: Read>(r: R) -> Result<Vec<GoldRecord>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let hdr = rd.headers()?.clone();
    if hdr.iter().map(str::trim).ne(header()) {
        return Err(Error::Parse {
            line: 1,
            msg: format!(
                "unexpected Gold header: {}",
                hdr.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut out = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let err = |msg: String| Error::Parse { line, msg };
        if rec.len() != 13 {
            return Err(err(format!("expected 13 fields, got {}", rec.len())));
        }
        let mut f = [0.0; 10];
        for (k, x) in f.iter_mut().enumerate() {
            let v: f64 = rec[k]
                .trim()
                .parse()
                .map_err(|_| err(format!("bad {}: {:?}", FEATURE_NAMES[k], &rec[k])))?;
            if !(0.0..=1.0).contains(&v) {
                return Err(err(format!("{} = {v} outside [0, 1]", FEATURE_NAMES[k])));
            }
            *x = v;
        }
        let label: usize = rec[10]
            .trim()
            .parse()
            .map_err(|_| err(format!("bad label {:?}", &rec[10])))?;
        let label = Severity::from_index(label).map_err(|e| err(e.to_string()))?;
        let source = rec[11]
            .trim()
            .parse()
            .map_err(|e: Error| err(e.to_string()))?;
        let window_id = rec[12]
            .trim()
            .parse()
            .map_err(|e: Error| err(e.to_string()))?;
        out.push(GoldRecord {
            features: FeatureVector(f),
            label,
            source,
            window_id,
        });
    }
    Ok(out)
}

pub fn write_gold_file(path: impl AsRef<Path>, records: &[GoldRecord]) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
    write_gold(std::io::BufWriter::new(f), records)
}

pub fn read_gold_file(path: impl AsRef<Path>) -> Result<Vec<GoldRecord>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::file(path, e))?;
    read_gold(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_is_exact() {
        let mut buf = Vec::new();
        write_gold(&mut buf, &[]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap().trim_end(),
            "last_glucose_norm,mean_glucose_norm,min_glucose_norm,max_glucose_norm,abs_slope_norm,signed_slope_norm,glucose_std_norm,glucose_range_norm,time_below_70_pct,time_above_180_pct,label,source,window_id"
        );
    }

    #[test]
    fn window_id_text() {
        let id = WindowId {
            patient: 3,
            index: 1207,
        };
        assert_eq!(id.to_string(), "p3-w1207");
        assert_eq!("p3-w1207".parse::<WindowId>().unwrap(), id);
        assert!("3-w1".parse::<WindowId>().is_err());
        assert!("p3w1".parse::<WindowId>().is_err());
    }

    #[test]
    fn rejects_bad_rows() {
        let hdr = header().join(",");
        for row in [
            "0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,3,synthetic,p0-w0",
            "0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,1.5,0,synthetic,p0-w0",
            "0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0,real,p0-w0",
            "0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1,NaN,0,synthetic,p0-w0",
        ] {
            let text = format!("{hdr}\n{row}\n");
            assert!(read_gold(text.as_bytes()).is_err(), "{row}");
        }
        assert!(read_gold("a,b\n".as_bytes()).is_err());
    }

    fn arb_record() -> impl Strategy<Value = GoldRecord> {
        (
            prop::array::uniform10(0.0f64..=1.0),
            0usize..3,
            any::<bool>(),
            any::<u32>(),
            any::<u32>(),
        )
            .prop_map(|(f, l, ext, p, i)| GoldRecord {
                features: FeatureVector(f),
                label: Severity::from_index(l).unwrap(),
                source: if ext {
                    Source::External
                } else {
                    Source::Synthetic
                },
                window_id: WindowId {
                    patient: p,
                    index: i,
                },
            })
    }

    proptest! {
        #[test]
        fn csv_round_trip(recs in prop::collection::vec(arb_record(), 0..20)) {
            let mut buf = Vec::new();
            write_gold(&mut buf, &recs).unwrap();
            prop_assert_eq!(read_gold(buf.as_slice()).unwrap(), recs);
        }
    }
}
