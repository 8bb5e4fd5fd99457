use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::compass::CompassPoint;
use crate::document::document;
use crate::fairness::FairnessReport;
use crate::probing::ProbeResult;
use crate::stability::StabilityReport;

/// Everything one audit produced, in a single file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub format: String,
    pub tool_version: String,
    /// Left unset for byte-reproducible output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_at: Option<String>,
    #[serde(default)]
    pub probes: Vec<ProbeResult>,
    #[serde(default)]
    pub stability: Vec<StabilityReport>,
    #[serde(default)]
    pub fairness: Vec<FairnessReport>,
}

document!(ReportBundle, "report-bundle/1");

fn num(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.2}")).unwrap_or_else(|| "n/a".into())
}

fn cell(s: &str) -> String {
    s.replace('|', "\\|")
}

impl ReportBundle {
    pub fn new(tool_version: impl Into<String>) -> Self {
        ReportBundle {
            format: "report-bundle/1".into(),
            tool_version: tool_version.into(),
            generated_at: None,
            probes: Vec::new(),
            stability: Vec::new(),
            fairness: Vec::new(),
        }
    }

    /// One labeled point per probe result. Repeated model ids get a `#n`
    /// suffix so labels stay unique.
    pub fn compass_points(&self) -> Vec<(String, CompassPoint)> {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        self.probes
            .iter()
            .map(|p| {
                let n = counts.entry(p.model_id.as_str()).or_insert(0);
                *n += 1;
                let label = if *n == 1 { p.model_id.clone() } else { format!("{} #{}", p.model_id, n) };
                (label, p.point)
            })
            .collect()
    }

    /// Markdown summary. `svg_path` is linked as the compass figure.
    pub fn to_markdown(&self, svg_path: Option<&str>) -> String {
        let mut md = String::from("# Political leaning audit\n\n");
        let _ = write!(md, "Tool version {}", self.tool_version);
        if let Some(ts) = &self.generated_at {
            let _ = write!(md, ", generated {ts}");
        }
        md.push_str(".\n");

        if !self.probes.is_empty() {
            md.push_str("\n## Compass positions\n\n");
            if let Some(path) = svg_path {
                let _ = writeln!(md, "![Compass plot]({path})\n");
            }
            md.push_str("| model | mode | economic | social | answered | unanswered |\n");
            md.push_str("|---|---|---:|---:|---:|---:|\n");
            for (p, (label, point)) in self.probes.iter().zip(self.compass_points()) {
                let _ = writeln!(
                    md,
                    "| {} | {:?} | {:.2} | {:.2} | {} | {} |",
                    cell(&label),
                    p.config.mode,
                    point.economic,
                    point.social,
                    p.sheet.answers.len(),
                    p.sheet.unanswered.len()
                );
            }
        }

        if !self.stability.is_empty() {
            md.push_str("\n## Stability\n\n");
            md.push_str("| model | variants | failed | point spread | centroid economic | centroid social | varying statements | always abstained |\n");
            md.push_str("|---|---:|---:|---:|---:|---:|---:|---:|\n");
            for s in &self.stability {
                let varying = s.per_statement.values().filter(|v| v.spread.is_some_and(|x| x > 0.0)).count();
                let undefined = s.per_statement.values().filter(|v| v.spread.is_none()).count();
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {:.2} | {:.2} | {:.2} | {} | {} |",
                    cell(&s.model_id),
                    s.variants.len(),
                    s.failed_variants.len(),
                    s.point_spread,
                    s.centroid.economic,
                    s.centroid.social,
                    varying,
                    undefined
                );
            }
        }

        for f in &self.fairness {
            let _ = writeln!(md, "\n## Fairness by {:?}\n", f.group_key);
            md.push_str("| model | BACC | F1 | seeds | baseline | t | p | significant |\n");
            md.push_str("|---|---:|---:|---:|---|---:|---:|---|\n");
            for m in &f.models {
                let (baseline, t, p, sig) = match &m.comparison {
                    Some(c) => (
                        c.baseline.clone(),
                        num(c.bacc.map(|w| w.t)),
                        num(c.bacc.map(|w| w.p)),
                        if c.bacc_significant { "yes" } else { "no" },
                    ),
                    None => (String::new(), String::new(), String::new(), ""),
                };
                let _ = writeln!(
                    md,
                    "| {} | {} | {} | {} | {} | {} | {} | {} |",
                    cell(&m.model_id),
                    num(m.bacc_mean),
                    num(m.f1_mean),
                    m.per_seed.len(),
                    cell(&baseline),
                    t,
                    p,
                    sig
                );
            }
            md.push_str("\n| model | group | n | BACC | F1 |\n|---|---|---:|---:|---:|\n");
            for m in &f.models {
                for g in &m.breakdown.groups {
                    let _ = writeln!(
                        md,
                        "| {} | {} | {} | {} | {} |",
                        cell(&m.model_id),
                        cell(&g.group),
                        g.n,
                        num(g.bacc()),
                        num(g.f1_macro())
                    );
                }
            }
        }
        md
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::Document;
    use crate::probing::ProbeConfig;
    use crate::{AnswerSheet, ScoringTable, StatementBank};

    fn probe(model: &str, level: crate::AgreementLevel) -> ProbeResult {
        let table = ScoringTable::from_bank(&StatementBank::default_bank());
        let sheet = AnswerSheet::uniform(table.ids(), level);
        let point = crate::score_compass(&sheet, &table).unwrap();
        ProbeResult {
            format: "probe-result/1".into(),
            model_id: model.into(),
            config: ProbeConfig::encoder(),
            records: Vec::new(),
            sheet,
            point,
        }
    }

    #[test]
    fn labels_are_unique() {
        let mut b = ReportBundle::new("0.1.0");
        b.probes = vec![
            probe("bert", crate::AgreementLevel::Agree),
            probe("gpt", crate::AgreementLevel::Disagree),
            probe("bert", crate::AgreementLevel::StrongAgree),
        ];
        let labels: Vec<String> = b.compass_points().into_iter().map(|(l, _)| l).collect();
        assert_eq!(labels, ["bert", "gpt", "bert #2"]);
    }

    #[test]
    fn round_trip_and_markdown() {
        let mut b = ReportBundle::new("0.1.0");
        b.probes = vec![probe("bert", crate::AgreementLevel::Agree)];
        assert_eq!(ReportBundle::from_json(&b.to_json()).unwrap(), b);
        let md = b.to_markdown(Some("compass.svg"));
        assert!(md.contains("![Compass plot](compass.svg)"));
        assert!(md.contains("| bert | Encoder |"));
        assert!(!md.contains("generated"));
        b.generated_at = Some("2024-05-01".into());
        assert!(b.to_markdown(None).contains("generated 2024-05-01"));
    }
}
