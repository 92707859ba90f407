//! Check records and report rendering. Reports are deterministic for a
//! fixed (input, seed): records are emitted in input order with a fixed
//! per-module check order, and both renderings share the same verdicts.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    InconclusiveAtPrecision,
    NotApplicable,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::InconclusiveAtPrecision => "inconclusive-at-precision",
            Verdict::NotApplicable => "not-applicable",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckRecord {
    pub module: String,
    pub check: String,
    pub verdict: Verdict,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub detail: String,
    /// effective precision the check ran at: (p, n_p, n_u)
    pub precision: (u64, u32, usize),
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Report {
    pub records: Vec<CheckRecord>,
}

impl Report {
    pub fn push(
        &mut self,
        module: &str,
        check: &str,
        verdict: Verdict,
        detail: impl Into<String>,
        precision: (u64, u32, usize),
    ) {
        self.records.push(CheckRecord {
            module: module.to_string(),
            check: check.to_string(),
            verdict,
            detail: detail.into(),
            precision,
        });
    }

    pub fn extend(&mut self, other: Report) {
        self.records.extend(other.records);
    }

    pub fn count(&self, v: Verdict) -> usize {
        self.records.iter().filter(|r| r.verdict == v).count()
    }

    pub fn has_fail(&self) -> bool {
        self.count(Verdict::Fail) > 0
    }

    pub fn has_inconclusive(&self) -> bool {
        self.count(Verdict::InconclusiveAtPrecision) > 0
    }

    /// 0 = all pass, 1 = at least one fail, 3 = inconclusive present (used
    /// with --strict); parse/usage errors exit 2 before a report exists.
    pub fn exit_code(&self, strict: bool) -> i32 {
        if self.has_fail() {
            1
        } else if strict && self.has_inconclusive() {
            3
        } else {
            0
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// aligned text table, one line per record, plus a summary line
    pub fn render_text(&self) -> String {
        let mut w_mod = "module".len();
        let mut w_check = "check".len();
        let mut w_verdict = "verdict".len();
        for r in &self.records {
            w_mod = w_mod.max(r.module.len());
            w_check = w_check.max(r.check.len());
            w_verdict = w_verdict.max(r.verdict.as_str().len());
        }
        let mut out = String::new();
        out.push_str(&format!(
            "{:w_mod$}  {:w_check$}  {:w_verdict$}  detail\n",
            "module", "check", "verdict"
        ));
        for r in &self.records {
            out.push_str(&format!(
                "{:w_mod$}  {:w_check$}  {:w_verdict$}  {}\n",
                r.module,
                r.check,
                r.verdict.as_str(),
                r.detail
            ));
        }
        out.push_str(&format!(
            "total {} | pass {} | fail {} | inconclusive {} | not-applicable {}\n",
            self.records.len(),
            self.count(Verdict::Pass),
            self.count(Verdict::Fail),
            self.count(Verdict::InconclusiveAtPrecision),
            self.count(Verdict::NotApplicable),
        ));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let mut r = Report::default();
        r.push("m", "c", Verdict::Pass, "", (3, 2, 4));
        assert_eq!(r.exit_code(false), 0);
        r.push("m", "c2", Verdict::InconclusiveAtPrecision, "", (3, 2, 4));
        assert_eq!(r.exit_code(false), 0);
        assert_eq!(r.exit_code(true), 3);
        r.push("m", "c3", Verdict::Fail, "boom", (3, 2, 4));
        assert_eq!(r.exit_code(false), 1);
        assert_eq!(r.exit_code(true), 1);
    }

    #[test]
    fn renderings_agree_on_verdicts() {
        let mut r = Report::default();
        r.push("alpha", "check-one", Verdict::Pass, "", (2, 3, 8));
        r.push("alpha", "check-two", Verdict::Fail, "detail here", (2, 3, 8));
        let text = r.render_text();
        assert!(text.contains("pass"));
        assert!(text.contains("fail"));
        let parsed: Report = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(parsed.records.len(), 2);
        assert_eq!(parsed.records[1].verdict, Verdict::Fail);
    }
}
