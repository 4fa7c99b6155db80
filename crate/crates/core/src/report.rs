//! Check runner and machine-readable reports.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::entangle::{ppt_report, upb_mixed_state};
use crate::error::{domain, Error, Result};
use crate::families::{expected_size, upb_ddd};
use crate::linalg::Tolerances;
use crate::opm::{is_trivial_opm, strongest_nonlocality, MeasuredSubset, VerdictKind};
use crate::states::{party_name, StateSet};
use crate::unextend::{is_upb, UpbVerdict};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Status {
    Pass,
    Skipped,
    Inconclusive,
    Fail,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Inconclusive => "INCONCLUSIVE",
            Status::Skipped => "SKIPPED",
        })
    }
}

impl From<VerdictKind> for Status {
    fn from(k: VerdictKind) -> Self {
        match k {
            VerdictKind::Trivial => Status::Pass,
            VerdictKind::Nontrivial => Status::Fail,
            VerdictKind::Inconclusive => Status::Inconclusive,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Check {
    Orth,
    Upb,
    Strong,
    Ppt,
}

impl Check {
    pub const ALL: [Check; 4] = [Check::Orth, Check::Upb, Check::Strong, Check::Ppt];
}

impl FromStr for Check {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "orth" => Ok(Check::Orth),
            "upb" => Ok(Check::Upb),
            "strong" => Ok(Check::Strong),
            "ppt" => Ok(Check::Ppt),
            other => domain(format!("unknown check '{other}' (expected orth, upb, strong or ppt)")),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RunOptions {
    pub tol: Tolerances,
    pub upb_max_d: usize,
    pub opm_max_d: usize,
    pub use_symmetry: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { tol: Tolerances::default(), upb_max_d: 5, opm_max_d: 6, use_symmetry: true }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub check: String,
    pub status: Status,
    pub detail: String,
    pub secs: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub family: String,
    pub dims: Vec<usize>,
    pub size: usize,
    pub options: RunOptions,
    pub checks: Vec<CheckResult>,
    pub secs: f64,
}

impl RunReport {
    /// Worst status among the checks that ran; SKIPPED only if none did.
    pub fn worst(&self) -> Status {
        let ran = self.checks.iter().map(|c| c.status).filter(|&s| s != Status::Skipped).max();
        match ran {
            Some(s) => s,
            None if self.checks.is_empty() => Status::Pass,
            None => Status::Skipped,
        }
    }

    /// 0 when everything passed or was skipped, 1 on any failure, 2 on any
    /// inconclusive result without failures.
    pub fn exit_code(&self) -> i32 {
        match self.worst() {
            Status::Pass | Status::Skipped => 0,
            Status::Fail => 1,
            Status::Inconclusive => 2,
        }
    }

    pub fn to_text(&self) -> String {
        let t = &self.options.tol;
        let mut out = format!(
            "upbv {} | set {} | dims {:?} | {} states\ntolerances: zero {:e}, rank {:e}, psd {:e}, gap_min {:e}\n",
            self.version, self.family, self.dims, self.size, t.zero, t.rank, t.psd, t.gap_min
        );
        for c in &self.checks {
            out += &format!("{:<12} {:<12} {} ({:.3}s)\n", c.check, c.status.to_string(), c.detail, c.secs);
        }
        out += &format!("overall: {} ({:.3}s)\n", self.worst(), self.secs);
        out
    }
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed().as_secs_f64())
}

fn local_dim(set: &StateSet) -> usize {
    set.dims.iter().copied().max().unwrap_or(0)
}

pub fn check_orth(set: &StateSet, tol: &Tolerances) -> CheckResult {
    let (max, secs) = timed(|| set.max_offdiag_gram());
    let status = if max <= tol.zero { Status::Pass } else { Status::Fail };
    CheckResult { check: "orth".into(), status, detail: format!("max normalized overlap {max:.3e} (tol {:e})", tol.zero), secs }
}

pub fn check_upb(set: &StateSet, opts: &RunOptions) -> CheckResult {
    if local_dim(set) > opts.upb_max_d {
        return CheckResult {
            check: "upb".into(),
            status: Status::Skipped,
            detail: format!("local dimension {} exceeds --upb-max-d {}", local_dim(set), opts.upb_max_d),
            secs: 0.0,
        };
    }
    let (v, secs) = timed(|| is_upb(set, &opts.tol));
    let (status, detail) = match v {
        UpbVerdict::Upb => (Status::Pass, format!("no orthogonal product vector (tol {:e})", opts.tol.zero)),
        UpbVerdict::Extendible(w) => {
            (Status::Fail, format!("extendible: witness residual {:.3e} (tol {:e})", w.residual, opts.tol.zero))
        }
        UpbVerdict::Invalid(msg) => (Status::Fail, format!("invalid input: {msg}")),
    };
    CheckResult { check: "upb".into(), status, detail, secs }
}

/// One result per bipartite cut for three parties, one per single measured
/// party otherwise.
pub fn check_strong(set: &StateSet, opts: &RunOptions) -> Vec<CheckResult> {
    let tol = &opts.tol;
    if local_dim(set) > opts.opm_max_d {
        return vec![CheckResult {
            check: "strong".into(),
            status: Status::Skipped,
            detail: format!("local dimension {} exceeds --opm-max-d {}", local_dim(set), opts.opm_max_d),
            secs: 0.0,
        }];
    }
    if set.parties() == 3 {
        let (rep, secs) = timed(|| strongest_nonlocality(set, opts.use_symmetry, tol));
        return match rep {
            Ok(rep) => rep
                .cuts
                .iter()
                .map(|c| {
                    let via = c.inherited_from.as_ref().map(|f| format!(", by symmetry from {f}")).unwrap_or_default();
                    CheckResult {
                        check: format!("strong[{}]", c.measured),
                        status: c.verdict.kind().into(),
                        detail: format!(
                            "{} across {}: dim {}, gap {:.3e} (gap_min {:e}){via}",
                            c.verdict.kind(),
                            c.cut,
                            c.verdict.dim(),
                            c.verdict.gap_ratio(),
                            tol.gap_min
                        ),
                        secs: if c.inherited_from.is_some() { 0.0 } else { secs },
                    }
                })
                .collect(),
            Err(e) => vec![CheckResult { check: "strong".into(), status: Status::Fail, detail: e.to_string(), secs }],
        };
    }
    (0..set.parties())
        .into_par_iter()
        .map(|p| {
            let name = party_name(p);
            let (v, secs) = timed(|| MeasuredSubset::new(&set.dims, &[p]).and_then(|m| is_trivial_opm(set, &m, tol)));
            match v {
                Ok(v) => CheckResult {
                    check: format!("strong[{name}]"),
                    status: v.kind().into(),
                    detail: format!(
                        "{} with {name} measuring alone: dim {}, gap {:.3e} (gap_min {:e})",
                        v.kind(),
                        v.dim(),
                        v.gap_ratio(),
                        tol.gap_min
                    ),
                    secs,
                },
                Err(e) => CheckResult { check: format!("strong[{name}]"), status: Status::Fail, detail: e.to_string(), secs },
            }
        })
        .collect()
}

/// PPT of `(I - P) / (D - t)`. The complement projector is formed whether or
/// not the set is a UPB; the `upb` check decides that separately.
pub fn check_ppt(set: &StateSet, tol: &Tolerances) -> (CheckResult, Option<f64>) {
    let (res, secs) = timed(|| upb_mixed_state(set, tol, true).and_then(|rho| ppt_report(&rho)));
    match res {
        Ok(entries) => {
            let min = entries.iter().map(|e| e.min_eigenvalue).fold(f64::INFINITY, f64::min);
            let status = if min >= -tol.psd { Status::Pass } else { Status::Fail };
            let parts: Vec<String> = entries.iter().map(|e| format!("{} {:.3e}", e.cut, e.min_eigenvalue)).collect();
            let detail = format!(
                "min eigenvalue of partial transposes: {} (psd slack {:e}); state normalized by 1/(D-t)",
                parts.join(", "),
                tol.psd
            );
            (CheckResult { check: "ppt".into(), status, detail, secs }, Some(min))
        }
        Err(e) => (CheckResult { check: "ppt".into(), status: Status::Fail, detail: e.to_string(), secs }, None),
    }
}

pub fn run_checks(set: &StateSet, checks: &[Check], opts: &RunOptions) -> RunReport {
    let t = Instant::now();
    let mut results = Vec::new();
    for check in Check::ALL.iter().filter(|c| checks.contains(c)) {
        match check {
            Check::Orth => results.push(check_orth(set, &opts.tol)),
            Check::Upb => results.push(check_upb(set, opts)),
            Check::Strong => results.extend(check_strong(set, opts)),
            Check::Ppt => results.push(check_ppt(set, &opts.tol).0),
        }
    }
    RunReport {
        tool: "upbv".into(),
        version: VERSION.into(),
        family: set.name.clone(),
        dims: set.dims.clone(),
        size: set.len(),
        options: *opts,
        checks: results,
        secs: t.elapsed().as_secs_f64(),
    }
}

/// One CSV row of the dimension sweep, in the fixed column order.
#[derive(Clone, Debug, Serialize)]
pub struct ReportRow {
    pub d: usize,
    pub family: String,
    pub size: usize,
    pub expected: usize,
    pub orth: Status,
    pub upb: Status,
    pub opm_bc_dim: Option<usize>,
    pub opm_ca_dim: Option<usize>,
    pub opm_ab_dim: Option<usize>,
    pub min_gap: Option<f64>,
    pub ppt_min: Option<f64>,
    pub secs: f64,
}

pub fn report_row(d: usize, opts: &RunOptions) -> Result<ReportRow> {
    let t = Instant::now();
    let set = upb_ddd(d)?;
    let expected = expected_size(d)?;
    let orth = check_orth(&set, &opts.tol).status;
    let upb = check_upb(&set, opts).status;
    let (mut bc, mut ca, mut ab, mut min_gap) = (None, None, None, None);
    if d <= opts.opm_max_d {
        let rep = strongest_nonlocality(&set, opts.use_symmetry, &opts.tol)?;
        for c in &rep.cuts {
            let dim = Some(c.verdict.dim());
            match c.measured.as_str() {
                "BC" => bc = dim,
                "CA" => ca = dim,
                "AB" => ab = dim,
                _ => {}
            }
        }
        min_gap = Some(rep.min_gap());
    }
    let ppt_min = check_ppt(&set, &opts.tol).1;
    Ok(ReportRow {
        d,
        family: "ddd".into(),
        size: set.len(),
        expected,
        orth,
        upb,
        opm_bc_dim: bc,
        opm_ca_dim: ca,
        opm_ab_dim: ab,
        min_gap,
        ppt_min,
        secs: t.elapsed().as_secs_f64(),
    })
}

/// Rows for `dmin..=dmax`, computed in parallel and returned in order.
pub fn sweep(dmin: usize, dmax: usize, opts: &RunOptions) -> Result<Vec<ReportRow>> {
    if dmin < 3 || dmin > dmax {
        return domain(format!("need 3 <= dmin <= dmax, got {dmin}..{dmax}"));
    }
    (dmin..=dmax).into_par_iter().map(|d| report_row(d, opts)).collect()
}

pub fn write_csv<W: Write>(rows: &[ReportRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}
