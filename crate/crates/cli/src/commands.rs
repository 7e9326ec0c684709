//! One function per subcommand; each returns a [`Report`] and records the
//! checks that failed as violations.

use cobound::conditions::{
    dyadic, evaluate_all, gordin_norm_series, heyde_condition, hannan_condition, tail_norm_inequalities,
    tail_norms, tail_sum_check, tail_sum_constant, weighted_projection, conditional_expectation_condition,
    ConditionId, ConditionReport, Conditioning, Verdict,
};
use cobound::decomposition::{decompose, g_norm_identity, reconstruct};
use cobound::fieldsim::{
    partial_sum_totals, sample_box_for, sample_field_values, sample_innovations, unit_open, verify_pointwise,
    InnovationModel, LatticeBox, Purpose, SiteStream,
};
use cobound::limits::{
    moment_inequality, orlicz_decay_fit, orlicz_tail_bound, tail_bound_check, wip_experiment, BoundReport,
};
use cobound::{CoefficientField, GeneratorRule, MultiIndex};
use serde_json::json;

use crate::config::{Command, ResolvedConfig};
use crate::error::CliResult;
use crate::output::{block, num, opt_num, Report, Table};

/// Relative tolerance for closed-form identities checked by the commands.
pub const IDENTITY_RTOL: f64 = 1e-9;

pub fn run_command(config: &ResolvedConfig) -> CliResult<Report> {
    match config.command {
        Command::Check => check(config),
        Command::Decompose => decompose_cmd(config),
        Command::Verify => verify(config),
        Command::Simulate => simulate(config),
        Command::Wip => wip(config),
        Command::Moments => moments(config),
        Command::Tails => tails(config),
        Command::Orlicz => orlicz(config),
        Command::Tailsum => tailsum(config),
        Command::Counterexample => counterexample(config),
    }
}

fn rel_diff(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

fn block_size(config: &ResolvedConfig) -> MultiIndex {
    MultiIndex::from(config.run.n.clone().expect("resolved block size"))
}

fn model_for(config: &ResolvedConfig, field: &CoefficientField) -> InnovationModel {
    InnovationModel::new(config.law, field.channel_count())
}

fn condition_rows(table: &mut Table, label: &str, report: &ConditionReport) {
    for (i, (&n, &p)) in report.cutoffs.iter().zip(&report.partials).enumerate() {
        let transfer = report.transfer_form_partials.as_ref().map(|t| t[i]);
        table.push(vec![
            label.to_string(),
            report.condition.to_string(),
            n.to_string(),
            num(p),
            opt_num(transfer),
        ]);
    }
}

fn condition_summary(report: &ConditionReport) -> serde_json::Value {
    json!({
        "verdict": report.verdict,
        "growth": report.growth,
        "exact": report.exact,
        "monotone": report.is_monotone(),
        "last": report.last(),
        "subset_breakdown": report.subset_breakdown,
    })
}

/// Largest relative gap between the adapted orthant form and the transfer
/// form, for reports that carry both.
fn transfer_gap(report: &ConditionReport) -> Option<f64> {
    if report.condition != ConditionId::HeydeAdapted {
        return None;
    }
    let transfer = report.transfer_form_partials.as_ref()?;
    Some(
        report
            .partials
            .iter()
            .zip(transfer)
            .map(|(a, b)| rel_diff(*a, *b))
            .fold(0.0, f64::max),
    )
}

fn check(config: &ResolvedConfig) -> CliResult<Report> {
    let rule = config.rule()?;
    let ladder = config.ladder(&rule);
    let mut report = Report::default();
    let mut table = Table::new("conditions", &["rule", "condition", "cutoff", "partial", "transfer_form"]);
    let mut conditions = serde_json::Map::new();
    for (id, result) in evaluate_all(&rule, &ladder) {
        match result {
            Ok(r) => {
                condition_rows(&mut table, rule.token(), &r);
                let mut entry = condition_summary(&r);
                if let Some(gap) = transfer_gap(&r) {
                    entry["transfer_form_max_rel_diff"] = json!(gap);
                    if gap > IDENTITY_RTOL {
                        report.violation(format!("transfer form differs from the adapted orthant form by {gap:e}"));
                    }
                }
                conditions.insert(id.to_string(), entry);
            }
            Err(e) => {
                conditions.insert(id.to_string(), json!({ "error": e.to_string() }));
            }
        }
    }
    report.tables.push(table);
    report.insert("rule", rule.token());
    report.insert("adapted", rule.is_adapted());
    report.insert("cutoffs", &ladder);
    report.insert("conditions", conditions);
    Ok(report)
}

fn decompose_cmd(config: &ResolvedConfig) -> CliResult<Report> {
    let field = config.finite_field()?;
    let tol = config.run.tolerance.expect("resolved tolerance");
    let dec = decompose(&field)?;
    let residual = reconstruct(&dec)?.max_abs_diff(&field)?;
    let identity = g_norm_identity(&dec)?;
    let adapted = field.is_adapted();
    let support = dec.support_violations(adapted);

    let mut report = Report::default();
    let d = field.dimension();
    let mut columns = vec!["subset".to_string(), "channel".to_string()];
    columns.extend((1..=d).map(|q| format!("j{q}")));
    columns.push("value".into());
    let mut parts = Table {
        name: "decomposition".into(),
        columns,
        rows: Vec::new(),
    };
    for (s, g) in dec.parts() {
        for (k, j, v) in g.iter() {
            let mut row = vec![s.to_bitstring(), k.to_string()];
            row.extend(j.coords().iter().map(|c| c.to_string()));
            row.push(num(v));
            parts.push(row);
        }
    }
    let mut norms = Table::new("part_norms", &["subset", "closed_form", "direct", "rel_diff"]);
    let mut worst = 0.0f64;
    for (s, pair) in &identity {
        let gap = rel_diff(pair.closed_form, pair.direct);
        worst = worst.max(gap);
        norms.push(vec![s.to_bitstring(), num(pair.closed_form), num(pair.direct), num(gap)]);
    }
    report.tables.push(parts);
    report.tables.push(norms);

    if !(residual < tol) {
        report.violation(format!("round-trip residual {residual:e} is not below {tol:e}"));
    }
    if worst > IDENTITY_RTOL {
        report.violation(format!("norm identity off by a relative {worst:e}"));
    }
    if adapted && !support.is_empty() {
        report.violation(format!("{} coefficients of an adapted field's parts lie outside the orthant", support.len()));
    }
    report.insert("dimension", d);
    report.insert("channels", field.channel_count());
    report.insert("nnz", field.nnz());
    report.insert("adapted", adapted);
    report.insert("round_trip_residual", residual);
    report.insert("tolerance", tol);
    report.insert("norm_identity_max_rel_diff", worst);
    report.insert("support_violations", support.len());
    report.insert(
        "part_norms_squared",
        identity.iter().map(|(s, p)| (s.to_bitstring(), p.closed_form)).collect::<std::collections::BTreeMap<_, _>>(),
    );
    Ok(report)
}

fn verify(config: &ResolvedConfig) -> CliResult<Report> {
    let field = config.finite_field()?;
    let tol = config.run.tolerance.expect("resolved tolerance");
    let side = config.run.box_size.expect("resolved box size");
    let d = field.dimension();
    let dec = decompose(&field)?;
    let eval = LatticeBox::new(MultiIndex::zeros(d), MultiIndex::filled(d, side - 1))?;
    let sbox = sample_box_for(&field, Some(&dec), &eval)?;

    let mut report = Report::default();
    let mut table = Table::new("verify", &["law", "sites", "max_residual"]);
    let mut results = serde_json::Map::new();
    for law in config.run.laws.clone().unwrap_or_default() {
        let model = InnovationModel::new(law, field.channel_count());
        let sample = sample_innovations(&model, &sbox, config.seed)?;
        let residual = verify_pointwise(&field, &dec, &sample, &eval)?;
        table.push(vec![law.token().into(), eval.volume().to_string(), num(residual)]);
        results.insert(law.token().into(), json!(residual));
        if !(residual < tol) {
            report.violation(format!("{} residual {residual:e} is not below {tol:e}", law.token()));
        }
        if config.run.dump_values == Some(true) {
            let values = sample_field_values(&field, &model, &eval, config.seed, 0)?;
            report.files.push((format!("values_{}.csv", law.token()), values.to_delimited()));
        }
    }
    report.tables.push(table);
    report.insert("box", block(&eval.extents().iter().map(|&e| e as i64).collect::<Vec<_>>()));
    report.insert("tolerance", tol);
    report.insert("max_residual", results);
    Ok(report)
}

fn simulate(config: &ResolvedConfig) -> CliResult<Report> {
    let field = config.finite_field()?;
    let model = model_for(config, &field);
    let n = block_size(config);
    let reps = config.run.replications.expect("resolved replications");
    let totals = partial_sum_totals(&field, &model, &n, reps, config.seed)?;
    let root = (n.product() as f64).sqrt();
    let mut table = Table::new("partial_sums", &["replication", "s_n", "normalized"]);
    for (r, s) in totals.iter().enumerate() {
        table.push(vec![r.to_string(), num(*s), num(s / root)]);
    }
    let z: Vec<f64> = totals.iter().map(|s| s / root).collect();
    let mean = z.iter().sum::<f64>() / z.len() as f64;
    let var = if z.len() > 1 {
        z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (z.len() as f64 - 1.0)
    } else {
        0.0
    };
    let mut report = Report::default();
    report.tables.push(table);
    if config.run.dump_values == Some(true) {
        let values = sample_field_values(&field, &model, &LatticeBox::block(&n)?, config.seed, 0)?;
        report.files.push(("values.csv".into(), values.to_delimited()));
    }
    report.insert("n", n.coords());
    report.insert("replications", reps);
    report.insert("law", config.law);
    report.insert("normalized_mean", mean);
    report.insert("normalized_variance", var);
    report.insert("long_run_variance", field.long_run_variance());
    Ok(report)
}

fn wip(config: &ResolvedConfig) -> CliResult<Report> {
    let field = config.finite_field()?;
    let model = model_for(config, &field);
    let n = block_size(config);
    let reps = config.run.replications.expect("resolved replications");
    let r = wip_experiment(&field, &model, &n, reps, config.seed)?;
    let mut table = Table::new(
        "wip",
        &["n", "replications", "predicted_variance", "empirical_variance", "ks_statistic", "ks_p_value", "passed"],
    );
    table.push(vec![
        block(&r.n),
        r.replications.to_string(),
        num(r.predicted_variance),
        num(r.empirical_variance),
        opt_num(r.ks_statistic),
        opt_num(r.ks_p_value),
        r.passed.map(|p| p.to_string()).unwrap_or_else(|| "none".into()),
    ]);
    let mut report = Report::default();
    report.tables.push(table);
    if r.passed == Some(false) {
        report.violation("normalized partial sums do not match the predicted normal law");
    }
    report.insert("wip", &r);
    Ok(report)
}

fn bound_table(name: &str, rows: &[&BoundReport]) -> Table {
    let mut t = Table::new(
        name,
        &["kind", "p", "n", "x", "empirical", "standard_error", "constant", "bound", "margin_ratio", "holds", "formula"],
    );
    for b in rows {
        t.push(vec![
            format!("{:?}", b.kind).to_lowercase(),
            num(b.p),
            block(&b.n),
            opt_num(b.x),
            num(b.empirical),
            num(b.standard_error),
            num(b.constant),
            num(b.bound),
            num(b.margin_ratio),
            b.holds.to_string(),
            b.formula.to_string(),
        ]);
    }
    t
}

fn moments(config: &ResolvedConfig) -> CliResult<Report> {
    let field = config.finite_field()?;
    let model = model_for(config, &field);
    let n = block_size(config);
    let p = config.run.p.expect("resolved p");
    let reps = config.run.replications.expect("resolved replications");
    let r = moment_inequality(&field, &model, &n, p, reps, config.seed)?;
    let mut report = Report::default();
    report.tables.push(bound_table("moments", &[&r.bound]));
    if !r.bound.holds {
        report.violation("empirical moment exceeds the bound");
    }
    report.insert("moment", &r);
    Ok(report)
}

fn tails(config: &ResolvedConfig) -> CliResult<Report> {
    let field = config.finite_field()?;
    let model = model_for(config, &field);
    let dec = decompose(&field)?;
    let n = block_size(config);
    let p = config.run.p.expect("resolved p");
    let reps = config.run.replications.expect("resolved replications");
    let levels = config.run.levels.clone().unwrap_or_default();
    let r = tail_bound_check(&field, &dec, &model, &n, p, &levels, reps, config.seed)?;
    let mut rows = vec![&r.norm];
    rows.extend(r.tails.iter());
    let mut report = Report::default();
    report.tables.push(bound_table("tails", &rows));
    let mut norms = Table::new("part_norms", &["subset", "norm", "upper", "standard_error", "method"]);
    for (s, lp) in &r.part_norms {
        norms.push(vec![
            s.to_bitstring(),
            num(lp.value),
            num(lp.upper),
            num(lp.standard_error),
            format!("{:?}", lp.method).to_lowercase(),
        ]);
    }
    report.tables.push(norms);
    if !r.all_hold() {
        report.violation("an empirical norm or tail frequency exceeds its bound");
    }
    report.insert("tails", &r);
    Ok(report)
}

fn orlicz(config: &ResolvedConfig) -> CliResult<Report> {
    let field = config.finite_field()?;
    let model = model_for(config, &field);
    let dec = decompose(&field)?;
    let n = block_size(config);
    let q = config.run.q.expect("resolved q");
    let reps = config.run.replications.expect("resolved replications");
    let levels = config.run.levels.clone().unwrap_or_default();
    let r = orlicz_tail_bound(&field, &dec, &model, q, &n, &levels, reps, config.seed)?;
    let mut report = Report::default();
    let mut table = Table::new("orlicz_levels", &["x", "exceedances", "empirical", "bound"]);
    for l in &r.levels {
        table.push(vec![num(l.x), l.exceedances.to_string(), num(l.empirical), num(l.bound)]);
    }
    report.tables.push(table);
    report.insert("orlicz", &r);
    if let Some(sizes) = &config.run.sizes {
        let sizes: Vec<MultiIndex> = sizes.iter().map(|s| MultiIndex::from(s.clone())).collect();
        let fit = orlicz_decay_fit(&field, &model, q, &sizes, reps.min(4000), config.seed)?;
        let mut t = Table::new("orlicz_decay", &["volume", "neg_log_tail", "relative_error"]);
        for i in 0..fit.volumes.len() {
            t.push(vec![num(fit.volumes[i]), num(fit.neg_log_tails[i]), num(fit.relative_errors[i])]);
        }
        report.tables.push(t);
        if !fit.consistent {
            report.violation(format!(
                "tail decay exponent {} is below the bound rate {}",
                fit.fitted_exponent, fit.target_exponent
            ));
        }
        report.insert("decay", &fit);
    }
    Ok(report)
}

/// Uniform draws on `(0, 1)` from the auxiliary stream.
struct Uniforms(SiteStream);

impl Uniforms {
    fn new(seed: u64, trial: u64, channel: usize) -> Self {
        Uniforms(SiteStream::new(seed, Purpose::Auxiliary, trial, channel, cobound::fieldsim::InnovationLaw::Uniform))
    }

    fn next(&mut self) -> f64 {
        unit_open(self.0.next_words().0)
    }
}

fn tailsum(config: &ResolvedConfig) -> CliResult<Report> {
    let trials = config.run.trials.expect("resolved trials");
    let dims = config.run.dims.clone().unwrap_or_default();
    let mut report = Report::default();
    let mut sums = Table::new("tailsum", &["dim", "trial", "lhs", "rhs", "ratio"]);
    let mut per_dim = serde_json::Map::new();
    for &d in &dims {
        let constant = tail_sum_constant(d);
        let mut worst = 0.0f64;
        let mut failures = 0u64;
        for trial in 0..trials {
            let mut u = Uniforms::new(config.seed, trial, d);
            let entries = 1 + (u.next() * 11.0) as usize;
            let pairs: Vec<(MultiIndex, f64)> = (0..entries)
                .map(|_| {
                    let i: Vec<i64> = (0..d).map(|_| 1 + (u.next() * 6.0) as i64).collect();
                    (MultiIndex::from(i), u.next())
                })
                .collect();
            let w = CoefficientField::from_pairs(d, pairs)?;
            let c = tail_sum_check(&w)?;
            worst = worst.max(c.ratio);
            if c.lhs > constant * c.rhs * (1.0 + 1e-12) {
                failures += 1;
            }
            sums.push(vec![d.to_string(), trial.to_string(), num(c.lhs), num(c.rhs), num(c.ratio)]);
        }
        if failures > 0 {
            report.violation(format!("{failures} weight sets in dimension {d} exceed the constant {constant}"));
        }
        per_dim.insert(d.to_string(), json!({ "constant": constant, "max_ratio": worst, "failures": failures }));
    }

    let mut chain = Table::new(
        "tail_norms",
        &["trial", "length", "weighted_tail", "half_weighted_square", "cauchy_schwarz_bound", "max_scaled_tail", "scaled_tail_bound", "holds"],
    );
    let mut chain_failures = 0u64;
    for trial in 0..trials {
        let mut u = Uniforms::new(config.seed, trial, 0);
        let len = 1 + (u.next() * 60.0) as usize;
        let a: Vec<f64> = (0..len).map(|_| u.next().powi(3)).collect();
        let r = tail_norm_inequalities(&tail_norms(&a), &a)?;
        if !r.all_hold() {
            chain_failures += 1;
        }
        chain.push(vec![
            trial.to_string(),
            len.to_string(),
            num(r.weighted_tail),
            num(r.half_weighted_square),
            num(r.cauchy_schwarz_bound),
            num(r.max_scaled_tail),
            num(r.scaled_tail_bound),
            r.all_hold().to_string(),
        ]);
    }
    if chain_failures > 0 {
        report.violation(format!("{chain_failures} sequences break the tail-norm inequalities"));
    }
    report.tables.push(sums);
    report.tables.push(chain);
    report.insert("trials", trials);
    report.insert("tail_sum", per_dim);
    report.insert("tail_norm_failures", chain_failures);
    Ok(report)
}

fn counterexample(config: &ResolvedConfig) -> CliResult<Report> {
    let mut report = Report::default();
    let mut table = Table::new("counterexample", &["rule", "condition", "cutoff", "partial", "transfer_form"]);

    // dyadic spikes: the conditional-norm series diverges while the weighted
    // projection series converges
    let spikes = GeneratorRule::dyadic_spikes();
    let ladder = config.field.cutoffs.clone().unwrap_or_else(|| (10..=20).map(|e| 1u64 << e).collect());
    let gordin = gordin_norm_series(&spikes, &ladder)?;
    let weighted = weighted_projection(&spikes, &ladder)?;
    let hannan = hannan_condition(&spikes, &ladder)?;
    let heyde = heyde_condition(&spikes, &ladder)?;
    for r in [&heyde, &gordin, &weighted, &hannan] {
        condition_rows(&mut table, spikes.token(), r);
    }
    let mut harmonic_number = 0.0;
    let mut below_harmonic = Vec::new();
    for k in 1..=20u64 {
        harmonic_number += 1.0 / k as f64;
        if dyadic::tail_norm_sum(k) < harmonic_number {
            below_harmonic.push(k);
        }
    }
    if gordin.verdict != Verdict::Diverging {
        report.violation(format!("dyadic spikes: conditional-norm series is {}", gordin.verdict));
    }
    if weighted.verdict != Verdict::Converged {
        report.violation(format!("dyadic spikes: weighted projection series is {}", weighted.verdict));
    }
    if !below_harmonic.is_empty() {
        report.violation(format!("dyadic spikes: conditional-norm partials fall below H_K at K = {below_harmonic:?}"));
    }
    report.insert(
        "dyadic_spikes",
        json!({
            "cutoffs": ladder,
            "HEYDE_ADAPTED": condition_summary(&heyde),
            "GORDIN": condition_summary(&gordin),
            "WEIGHTED_PROJECTION": condition_summary(&weighted),
            "HANNAN": condition_summary(&hannan),
            "dominates_harmonic_numbers_up_to_20": below_harmonic.is_empty(),
        }),
    );

    // harmonic axis: the lagged conditional-expectation series vanishes
    // while the origin series and the Heyde series diverge
    let axis = GeneratorRule::harmonic_axis();
    let ladder: Vec<u64> = (6..=12).map(|e| 1u64 << e).collect();
    let lagged = conditional_expectation_condition(&axis, Conditioning::Lagged, &ladder)?;
    let origin = conditional_expectation_condition(&axis, Conditioning::Origin, &ladder)?;
    let heyde = heyde_condition(&axis, &ladder)?;
    for r in [&heyde, &origin, &lagged] {
        condition_rows(&mut table, axis.token(), r);
    }
    let lagged_max = lagged.partials.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if lagged_max > 1e-12 {
        report.violation(format!("harmonic axis: lagged series reaches {lagged_max:e}"));
    }
    if origin.verdict != Verdict::Diverging {
        report.violation(format!("harmonic axis: origin series is {}", origin.verdict));
    }
    if heyde.verdict != Verdict::Diverging {
        report.violation(format!("harmonic axis: Heyde series is {}", heyde.verdict));
    }
    report.insert(
        "harmonic_axis",
        json!({
            "cutoffs": ladder,
            "CONDEXP_SERIES_SHIFTED_max": lagged_max,
            "CONDEXP_SERIES": condition_summary(&origin),
            "HEYDE_ADAPTED": condition_summary(&heyde),
        }),
    );
    report.tables.push(table);
    Ok(report)
}
