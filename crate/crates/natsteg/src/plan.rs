//! Developing recipes: an ordered list of stages parsed from a
//! line-oriented text grammar (`gamma 2.2`, `demosaic bilinear RGGB`,
//! `colormatrix c11 .. c33`, `downsample tent 2`, `upsample 2`,
//! `quantize8`). Inline plans use `;` as the line separator.

use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfaPattern {
    Rggb,
    Bggr,
    Grbg,
    Gbrg,
}

impl CfaPattern {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RGGB" => Ok(CfaPattern::Rggb),
            "BGGR" => Ok(CfaPattern::Bggr),
            "GRBG" => Ok(CfaPattern::Grbg),
            "GBRG" => Ok(CfaPattern::Gbrg),
            other => Err(Error::Format(format!("unknown CFA pattern {other:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CfaPattern::Rggb => "RGGB",
            CfaPattern::Bggr => "BGGR",
            CfaPattern::Grbg => "GRBG",
            CfaPattern::Gbrg => "GBRG",
        }
    }

    /// Channel recorded at photo-site (row, col): 0 = R, 1 = G, 2 = B.
    pub fn channel_at(&self, row: usize, col: usize) -> usize {
        const PATTERNS: [[[usize; 2]; 2]; 4] = [
            [[0, 1], [1, 2]], // RGGB
            [[2, 1], [1, 0]], // BGGR
            [[1, 0], [2, 1]], // GRBG
            [[1, 2], [0, 1]], // GBRG
        ];
        let p = match self {
            CfaPattern::Rggb => 0,
            CfaPattern::Bggr => 1,
            CfaPattern::Grbg => 2,
            CfaPattern::Gbrg => 3,
        };
        PATTERNS[p][row % 2][col % 2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DownsampleKind {
    Sub,
    Box,
    Tent,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StageSpec {
    Gamma { gamma: f64 },
    Demosaic { cfa: CfaPattern },
    ColorMatrix { c: [[f64; 3]; 3] },
    Downsample { kind: DownsampleKind, factor: usize },
    Upsample { factor: usize },
    Quantize8,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DevelopPlan {
    pub stages: Vec<StageSpec>,
}

impl DevelopPlan {
    pub fn new(stages: Vec<StageSpec>) -> Result<Self> {
        for (i, s) in stages.iter().enumerate() {
            if matches!(s, StageSpec::Quantize8) && i + 1 != stages.len() {
                return Err(Error::InvalidArgument(
                    "quantize8 must be the last stage".into(),
                ));
            }
        }
        Ok(DevelopPlan { stages })
    }

    /// Parses a recipe; `;` and newlines both separate stages, so inline and
    /// file forms share one grammar.
    pub fn parse(text: &str) -> Result<Self> {
        let mut stages = Vec::new();
        for raw in text.split(|c| c == '\n' || c == ';') {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            stages.push(parse_stage(line)?);
        }
        Self::new(stages)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Normalized file-grammar form of the plan.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.stages {
            match s {
                StageSpec::Gamma { gamma } => out.push_str(&format!("gamma {gamma}\n")),
                StageSpec::Demosaic { cfa } => {
                    out.push_str(&format!("demosaic bilinear {}\n", cfa.name()))
                }
                StageSpec::ColorMatrix { c } => {
                    out.push_str("colormatrix");
                    for row in c {
                        for v in row {
                            out.push_str(&format!(" {v}"));
                        }
                    }
                    out.push('\n');
                }
                StageSpec::Downsample { kind, factor } => {
                    let name = match kind {
                        DownsampleKind::Sub => "sub",
                        DownsampleKind::Box => "box",
                        DownsampleKind::Tent => "tent",
                    };
                    out.push_str(&format!("downsample {name} {factor}\n"));
                }
                StageSpec::Upsample { factor } => out.push_str(&format!("upsample {factor}\n")),
                StageSpec::Quantize8 => out.push_str("quantize8\n"),
            }
        }
        out
    }
}

fn parse_stage(line: &str) -> Result<StageSpec> {
    let mut words = line.split_whitespace();
    let head = words.next().unwrap();
    let rest: Vec<&str> = words.collect();
    match head {
        "gamma" => {
            let gamma = one_arg(line, &rest)?.parse::<f64>().map_err(|_| bad(line))?;
            if !(gamma > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "gamma must be positive, got {gamma}"
                )));
            }
            Ok(StageSpec::Gamma { gamma })
        }
        "demosaic" => {
            if rest.len() != 2 || rest[0] != "bilinear" {
                return Err(Error::Format(format!(
                    "demosaic stage must be `demosaic bilinear <CFA>`, got {line:?}"
                )));
            }
            Ok(StageSpec::Demosaic {
                cfa: CfaPattern::parse(rest[1])?,
            })
        }
        "colormatrix" => {
            if rest.len() != 9 {
                return Err(Error::Format(format!(
                    "colormatrix needs 9 coefficients, got {}",
                    rest.len()
                )));
            }
            let mut c = [[0.0; 3]; 3];
            for (i, tok) in rest.iter().enumerate() {
                let v: f64 = tok.parse().map_err(|_| bad(line))?;
                if !v.is_finite() {
                    return Err(Error::InvalidArgument("colormatrix entry not finite".into()));
                }
                c[i / 3][i % 3] = v;
            }
            Ok(StageSpec::ColorMatrix { c })
        }
        "downsample" => {
            if rest.len() != 2 {
                return Err(bad(line));
            }
            let kind = match rest[0] {
                "sub" => DownsampleKind::Sub,
                "box" => DownsampleKind::Box,
                "tent" => DownsampleKind::Tent,
                other => {
                    return Err(Error::Format(format!(
                        "unknown downsample kind {other:?} (want sub/box/tent)"
                    )))
                }
            };
            let factor: usize = rest[1].parse().map_err(|_| bad(line))?;
            if factor == 0 {
                return Err(Error::InvalidArgument("downsample factor must be >= 1".into()));
            }
            Ok(StageSpec::Downsample { kind, factor })
        }
        "upsample" => {
            let factor: usize = one_arg(line, &rest)?.parse().map_err(|_| bad(line))?;
            if factor == 0 {
                return Err(Error::InvalidArgument("upsample factor must be >= 1".into()));
            }
            Ok(StageSpec::Upsample { factor })
        }
        "quantize8" => {
            if !rest.is_empty() {
                return Err(bad(line));
            }
            Ok(StageSpec::Quantize8)
        }
        other => Err(Error::Format(format!("unknown stage {other:?}"))),
    }
}

fn one_arg<'a>(line: &str, rest: &[&'a str]) -> Result<&'a str> {
    if rest.len() != 1 {
        return Err(bad(line));
    }
    Ok(rest[0])
}

fn bad(line: &str) -> Error {
    Error::Format(format!("cannot parse stage {line:?}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_inline_and_file_forms_identically() {
        let inline = DevelopPlan::parse("downsample box 5; quantize8").unwrap();
        let file = DevelopPlan::parse("downsample box 5\nquantize8\n").unwrap();
        assert_eq!(inline, file);
        assert_eq!(inline.stages.len(), 2);
    }

    #[test]
    fn normalized_text_round_trips() {
        let plan = DevelopPlan::parse(
            "gamma 2.2; demosaic bilinear RGGB; colormatrix 1 0 0 0 1 0 0 0 1; quantize8",
        )
        .unwrap();
        let back = DevelopPlan::parse(&plan.to_text()).unwrap();
        assert_eq!(plan, back);
    }

    #[test]
    fn quantize_must_be_last() {
        assert!(DevelopPlan::parse("quantize8; gamma 2").is_err());
        assert!(DevelopPlan::parse("gamma 2; quantize8").is_ok());
    }

    #[test]
    fn rejects_garbage() {
        assert!(DevelopPlan::parse("sharpen 3").is_err());
        assert!(DevelopPlan::parse("gamma").is_err());
        assert!(DevelopPlan::parse("downsample lanczos 2").is_err());
        assert!(DevelopPlan::parse("gamma -1").is_err());
    }

    #[test]
    fn cfa_channels() {
        let cfa = CfaPattern::Rggb;
        assert_eq!(cfa.channel_at(0, 0), 0);
        assert_eq!(cfa.channel_at(0, 1), 1);
        assert_eq!(cfa.channel_at(1, 0), 1);
        assert_eq!(cfa.channel_at(1, 1), 2);
        assert_eq!(CfaPattern::Bggr.channel_at(0, 0), 2);
    }
}
