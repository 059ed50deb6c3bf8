//! One function per command, each producing a table plus a count of points
//! whose solves failed.

use qmoney_core::protocol_sim::{bank_verify, issue_card, measure_honest, random_challenge, transcript_stats};
use qmoney_core::security::{
    self, certificate_grid, dual_certificate, honest_loss, AnalysisOptions, CertificateTolerances, ScenarioConfig,
    SweepGrid, SweepRow, SweepTasks,
};

use crate::config::{Command, Job, Task};
use crate::output::{Cell, Table};

pub struct Outcome {
    pub table: Table,
    pub failures: usize,
    /// Human-readable summary printed next to the machine-readable output.
    pub summary: Option<String>,
}

pub const SWEEP_COLUMNS: [&str; 12] =
    ["scenario", "phase_randomized", "mu", "eta_d", "e", "f_h", "f_d", "e_star", "gap", "secure", "t_star", "failure"];

fn tasks(task: Task) -> SweepTasks {
    SweepTasks { min_loss: task != Task::Error, min_error: task != Task::Loss }
}

fn sweep_cells(r: &SweepRow) -> Vec<Cell> {
    vec![
        Cell::Text(r.scenario.to_string()),
        r.phase_randomized.into(),
        r.mu.into(),
        r.eta_d.into(),
        r.e.into(),
        r.f_h.into(),
        r.f_d.into(),
        r.e_star.into(),
        r.gap.into(),
        r.secure.into(),
        r.t_star.into(),
        r.failure.clone().into(),
    ]
}

fn sweep_table(rows: &[SweepRow]) -> Outcome {
    let mut table = Table::new(&SWEEP_COLUMNS);
    for r in rows {
        table.push(sweep_cells(r));
    }
    let failures = rows.iter().filter(|r| r.failure.is_some()).count();
    Outcome { table, failures, summary: None }
}

fn grid(job: &Job) -> SweepGrid {
    SweepGrid { mu: job.mu.clone(), e: job.e.clone(), eta_d: job.eta_d.clone() }
}

pub fn run(job: &Job) -> anyhow::Result<Outcome> {
    let opts = AnalysisOptions::default();
    match job.command {
        Command::Solve => solve(job, &opts),
        Command::Sweep => {
            let rows = security::sweep(&grid(job), &job.scenarios, None, tasks(job.task), job.workers, &opts)?;
            Ok(sweep_table(&rows))
        }
        Command::Table3 => table3(job, &opts),
        Command::Certify => certify(job, &opts),
        Command::Lifetime => lifetime(job, &opts),
        Command::Simulate => simulate(job),
    }
}

fn solve(job: &Job, opts: &AnalysisOptions) -> anyhow::Result<Outcome> {
    let spec = job.scenarios[0];
    let cfg = ScenarioConfig::new(spec.scenario, spec.phase_randomized, job.mu[0])
        .with_eta_d(job.eta_d[0])
        .with_error(job.e[0])
        .with_n(job.n);
    let row = security::analyze_point(&cfg, tasks(job.task), opts);
    Ok(sweep_table(&[row]))
}

fn table3(job: &Job, opts: &AnalysisOptions) -> anyhow::Result<Outcome> {
    let rows = security::table3(job.workers, opts)?;
    let mut table = Table::new(&["phase_randomized", "eta_d", "mu", "e_trusted", "e_untrusted", "f_h", "failure"]);
    let pct = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{:.1}%", 100.0 * x));
    let mut view = format!("{:>6} {:>10} {:>12} {:>6}\n", "mu", "e trusted", "e untrusted", "f_h");
    let mut section = None;
    for r in &rows {
        table.push(vec![
            r.phase_randomized.into(),
            r.eta_d.into(),
            r.mu.into(),
            r.e_trusted.into(),
            r.e_untrusted.into(),
            r.f_h.into(),
            r.failure.clone().into(),
        ]);
        if section != Some((r.phase_randomized, r.eta_d)) {
            section = Some((r.phase_randomized, r.eta_d));
            let kind = if r.phase_randomized { "Phase-randomized" } else { "Non phase-randomized" };
            view.push_str(&format!("{kind}, eta_d = {:.0}%\n", 100.0 * r.eta_d));
        }
        view.push_str(&format!(
            "{:>6.2} {:>10} {:>12} {:>6}\n",
            r.mu,
            pct(r.e_trusted),
            pct(r.e_untrusted),
            pct(Some(r.f_h))
        ));
    }
    let failures = rows.iter().filter(|r| r.failure.is_some()).count();
    Ok(Outcome { table, failures, summary: Some(view) })
}

fn certify(job: &Job, opts: &AnalysisOptions) -> anyhow::Result<Outcome> {
    let (default_e, default_mu) = certificate_grid();
    let es = if job.e == [0.0] { default_e } else { job.e.clone() };
    let mus = if job.mu.is_empty() { default_mu } else { job.mu.clone() };
    let mut table = Table::new(&[
        "scenario",
        "phase_randomized",
        "e",
        "mu",
        "d1",
        "d2",
        "d3",
        "max_offdiagonal",
        "trace_d",
        "trace_identity_residual",
        "lmi_max_eigenvalue",
        "gap",
        "valid",
        "failure",
    ]);
    let tol = CertificateTolerances::default();
    let mut failures = 0;
    let mut invalid = 0;
    for spec in &job.scenarios {
        for &e in &es {
            for &mu in &mus {
                let cfg = ScenarioConfig::new(spec.scenario, spec.phase_randomized, mu).with_error(e);
                let mut row = vec![Cell::Text(spec.scenario.to_string()), spec.phase_randomized.into(), e.into(), mu.into()];
                match dual_certificate(&cfg, opts, &tol) {
                    Ok(c) => {
                        invalid += usize::from(!c.valid);
                        row.extend([
                            c.d1.into(),
                            c.d2.into(),
                            c.d3.into(),
                            c.max_offdiagonal.into(),
                            c.trace_d.into(),
                            c.trace_identity_residual.into(),
                            c.lmi_max_eigenvalue.into(),
                            c.gap.into(),
                            c.valid.into(),
                            Cell::from((!c.failures.is_empty()).then(|| c.failures.join("; "))),
                        ]);
                    }
                    Err(err) => {
                        failures += 1;
                        row.extend(std::iter::repeat(Cell::Empty).take(8));
                        row.extend([Cell::Bool(false), Cell::Text(err.to_string())]);
                    }
                }
                table.push(row);
            }
        }
    }
    let summary = format!("{} certificates, {invalid} invalid, {failures} solver failures\n", table.rows.len());
    Ok(Outcome { table, failures, summary: Some(summary) })
}

fn lifetime(job: &Job, opts: &AnalysisOptions) -> anyhow::Result<Outcome> {
    let memory = Some(job.memory);
    let only_loss = SweepTasks { min_loss: true, min_error: false };
    let rows = security::sweep(&grid(job), &job.scenarios, memory, only_loss, job.workers, opts)?;
    if job.t.is_empty() {
        return Ok(sweep_table(&rows));
    }
    let mut columns = SWEEP_COLUMNS.to_vec();
    columns.push("t");
    let mut table = Table::new(&columns);
    for r in &rows {
        for &t in &job.t {
            let mut at_t = r.clone();
            at_t.f_h = honest_loss(r.mu, r.eta_d, t, Some(&job.memory))?;
            at_t.secure = r.f_d.map(|f_d| f_d > at_t.f_h);
            let mut cells = sweep_cells(&at_t);
            cells.push(t.into());
            table.push(cells);
        }
    }
    let failures = rows.iter().filter(|r| r.failure.is_some()).count();
    Ok(Outcome { table, failures, summary: None })
}

/// Seed of stream `k` of row `row`, spread with the golden-ratio increment.
fn derive_seed(base: u64, row: usize, k: u64) -> u64 {
    base.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(3 * row as u64 + k + 1))
}

fn simulate(job: &Job) -> anyhow::Result<Outcome> {
    let mut table = Table::new(&[
        "mu",
        "eta_d",
        "trial",
        "seed",
        "positions",
        "no_clicks",
        "no_click_fraction",
        "f_h",
        "window",
        "double_clicks",
        "matched_answers",
        "matched_errors",
        "accepted",
    ]);
    let mut row_index = 0;
    for &mu in &job.mu {
        for &eta_d in &job.eta_d {
            for trial in 0..job.trials {
                let seed = derive_seed(job.seed, row_index, 0);
                let card = issue_card(job.positions, mu, seed)?;
                let challenge = random_challenge(job.positions, derive_seed(job.seed, row_index, 1));
                let transcript = measure_honest(&card, &challenge, eta_d, derive_seed(job.seed, row_index, 2))?;
                let stats = transcript_stats(&card, &transcript);
                let verdict = bank_verify(&card, &transcript, eta_d, job.kappa)?;
                table.push(vec![
                    mu.into(),
                    eta_d.into(),
                    trial.into(),
                    seed.into(),
                    job.positions.into(),
                    stats.no_clicks.into(),
                    stats.no_click_fraction().into(),
                    (-eta_d * mu).exp().into(),
                    verdict.window.into(),
                    stats.double_clicks.into(),
                    stats.matched_answers.into(),
                    stats.matched_errors.into(),
                    verdict.accepted.into(),
                ]);
                row_index += 1;
            }
        }
    }
    Ok(Outcome { table, failures: 0, summary: None })
}
