use impshap::data::{population_dataset, table1_y1, table1_y2, table2, table2_dataset, write_csv, write_joint_csv};
use impshap::forest::{build_forest, correlation_report, normalize, ClassSelector, CorrelationMode, LocalMethod};
use impshap::game::{
    check_axioms, game_global_info, game_global_variance, game_local_info, game_local_variance, GameKind,
};
use impshap::population::{check_decompositions, pop_local_all, total_gain, DECOMPOSITION_TOLERANCE};
use impshap::relevance::{verify_thm3, verify_thm4};
use impshap::{
    pop_global_mdi, pop_local_mdi, shapley_exact, Assignment, Impurity, JointDistribution, Target, VariableSubset,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::report::{emit, render, Provenance, Report, Table};
use crate::source::{self, Source};
use crate::{CliError, Command, DataArgs, ForestArgs, OutputArgs};

const SHAPLEY_TOLERANCE: f64 = 1e-10;

pub fn run(command: Command, command_line: String) -> Result<(), CliError> {
    match command {
        Command::Global {
            data,
            forest,
            normalize,
            output,
        } => global(&data, &forest, normalize, &output, command_line),
        Command::Local {
            data,
            forest,
            method,
            class,
            instances,
            normalize,
            output,
        } => {
            let src = source::load(&data)?;
            let xs = source::instances(&instances, &src.dataset)?;
            local(
                &src,
                &data,
                &forest,
                &method,
                class,
                &xs,
                normalize,
                &output,
                command_line,
            )
        }
        Command::Saabas {
            data,
            forest,
            class,
            instances,
            normalize,
            output,
        } => {
            let src = source::load(&data)?;
            let xs = source::instances(&instances, &src.dataset)?;
            local(
                &src,
                &data,
                &forest,
                &[LocalMethod::Saabas],
                class,
                &xs,
                normalize,
                &output,
                command_line,
            )
        }
        Command::Shapley {
            data,
            game,
            instance,
            output,
        } => shapley(&data, game, instance.as_deref(), &output, command_line),
        Command::PopMdi {
            data,
            impurity,
            instance,
            output,
        } => pop_mdi(&data, impurity, instance.as_deref(), &output, command_line),
        Command::Verify { data, output } => verify(&data, &output, command_line),
        Command::Compare {
            data,
            forest,
            class,
            instances,
            output,
        } => {
            let src = source::load(&data)?;
            let xs = source::instances(&instances, &src.dataset)?;
            compare(&src, &data, &forest, class, &xs, &output, command_line)
        }
        Command::GenData { data, joint, out } => gen_data(&data, joint, out.as_deref(), command_line),
    }
}

fn provenance(command_line: String, seed: u64, src: &Source) -> Provenance {
    Provenance {
        tool: "impshap",
        version: env!("CARGO_PKG_VERSION"),
        command_line,
        seed: Some(seed),
        dataset: src.name.clone(),
        dataset_fingerprint: src.dataset.fingerprint(),
    }
}

fn finish(report: Report, prov: &Provenance, output: &OutputArgs) -> Result<(), CliError> {
    emit(&render(&report, prov, output.format), output.out.as_deref())
}

fn feature_legend(names: &[String]) -> String {
    let items: Vec<String> = names.iter().enumerate().map(|(i, n)| format!("{i}={n}")).collect();
    format!("features: {}", items.join(" "))
}

fn parse_k_sweep(raw: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Usage(format!("--k-sweep expects `a..b` or a comma list, got `{raw}`"));
    if let Some((a, b)) = raw.split_once("..") {
        let a: usize = a.trim().parse().map_err(|_| bad())?;
        let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        Ok((a..=b).collect())
    } else {
        raw.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
    }
}

fn k_values(forest: &ForestArgs, p: usize) -> Result<Vec<usize>, CliError> {
    if forest.trees == 0 {
        return Err(CliError::Usage("--trees must be at least 1".into()));
    }
    let ks = match &forest.k_sweep {
        Some(raw) => parse_k_sweep(raw)?,
        None => vec![forest.k],
    };
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > p) {
        return Err(CliError::Usage(format!("K must lie in 1..={p}, got {k}")));
    }
    Ok(ks)
}

fn single_k(forest: &ForestArgs, p: usize) -> Result<usize, CliError> {
    match k_values(forest, p)?.as_slice() {
        [k] => Ok(*k),
        _ => Err(CliError::Usage("this command takes a single K".into())),
    }
}

fn global(
    data: &DataArgs,
    forest: &ForestArgs,
    normalized: bool,
    output: &OutputArgs,
    command_line: String,
) -> Result<(), CliError> {
    let src = source::load(data)?;
    let names = src.dataset.feature_names();
    let ks = k_values(forest, names.len())?;
    let mut table = Table::new(&["k", "feature", "score"]);
    table.legend.push(feature_legend(&names));
    let mut results = Vec::new();
    for k in ks {
        let f = build_forest(&src.dataset, k, forest.trees, forest.impurity, data.seed)?;
        let raw = f.global_mdi();
        let total: f64 = raw.iter().sum();
        let scores = if normalized { normalize(&raw) } else { raw };
        for (m, s) in scores.iter().enumerate() {
            table.push(vec![k as f64, m as f64, *s]);
        }
        results.push(json!({ "k": k, "scores": scores, "total": total }));
    }
    let body = json!({
        "impurity": forest.impurity,
        "trees": forest.trees,
        "normalized": normalized,
        "features": names,
        "results": results,
    });
    let prov = provenance(command_line, data.seed, &src);
    finish(
        Report {
            command: "global",
            body,
            table,
        },
        &prov,
        output,
    )
}

#[allow(clippy::too_many_arguments)]
fn local(
    src: &Source,
    data: &DataArgs,
    forest: &ForestArgs,
    methods: &[LocalMethod],
    class: Option<usize>,
    xs: &[Vec<f64>],
    normalized: bool,
    output: &OutputArgs,
    command_line: String,
) -> Result<(), CliError> {
    let names = src.dataset.feature_names();
    let k = single_k(forest, names.len())?;
    if methods.is_empty() {
        return Err(CliError::Usage(
            "--method needs at least one of local-mdi, saabas".into(),
        ));
    }
    let mut methods = methods.to_vec();
    methods.dedup();
    let f = build_forest(&src.dataset, k, forest.trees, forest.impurity, data.seed)?;
    let selector = class.map_or(ClassSelector::Predicted, ClassSelector::Fixed);
    let mut table = Table::new(&["method", "instance", "feature", "score"]);
    table.legend.push(feature_legend(&names));
    table.legend.push("method codes: 0=local-mdi 1=saabas".into());
    let mut matrices = Vec::new();
    for method in methods {
        let mut m = match method {
            LocalMethod::LocalMdi => f.local_mdi(xs)?,
            LocalMethod::Saabas => f.saabas(xs, selector)?,
        };
        if normalized {
            m.scores = m.scores.iter().map(|r| normalize(r)).collect();
        }
        let code = match method {
            LocalMethod::LocalMdi => 0.0,
            LocalMethod::Saabas => 1.0,
        };
        for (i, row) in m.scores.iter().enumerate() {
            for (j, s) in row.iter().enumerate() {
                table.push(vec![code, i as f64, j as f64, *s]);
            }
        }
        matrices.push(m);
    }
    let body = json!({
        "k": k,
        "trees": forest.trees,
        "impurity": forest.impurity,
        "normalized": normalized,
        "features": names,
        "instances": xs,
        "methods": matrices,
    });
    let prov = provenance(command_line, data.seed, src);
    finish(
        Report {
            command: "local",
            body,
            table,
        },
        &prov,
        output,
    )
}

fn shapley(
    data: &DataArgs,
    game: GameKind,
    instance: Option<&str>,
    output: &OutputArgs,
    command_line: String,
) -> Result<(), CliError> {
    let src = source::load(data)?;
    let j = src.require_joint()?;
    let needs_instance = matches!(game, GameKind::LocalInfo | GameKind::LocalVariance);
    let x = match (needs_instance, instance) {
        (true, Some(raw)) => Some(source::parse_codes(raw, j.p())?),
        (true, None) => return Err(CliError::Usage(format!("game {} needs --instance", game.name()))),
        (false, Some(_)) => return Err(CliError::Usage(format!("game {} takes no --instance", game.name()))),
        (false, None) => None,
    };
    let g = match (game, &x) {
        (GameKind::GlobalInfo, _) => game_global_info(j)?,
        (GameKind::GlobalVariance, _) => game_global_variance(j)?,
        (GameKind::LocalInfo, Some(x)) => game_local_info(j, x)?,
        (GameKind::LocalVariance, Some(x)) => game_local_variance(j, x)?,
        _ => {
            return Err(CliError::Usage(format!(
                "game {} cannot be built from data",
                game.name()
            )))
        }
    };
    let phi = shapley_exact(&g)?;
    let axioms = check_axioms(&g, &phi);
    let names = j.names()[..j.p()].to_vec();
    let mut table = Table::new(&["feature", "payoff"]);
    table.legend.push(feature_legend(&names));
    for (m, v) in phi.payoffs.iter().enumerate() {
        table.push(vec![m as f64, *v]);
    }
    let body = json!({
        "features": names,
        "instance": x,
        "shapley": phi,
        "efficiency_residual": phi.efficiency_residual(),
        "axioms": axioms,
    });
    let prov = provenance(command_line, data.seed, &src);
    finish(
        Report {
            command: "shapley",
            body,
            table,
        },
        &prov,
        output,
    )
}

fn pop_mdi(
    data: &DataArgs,
    impurity: Impurity,
    instance: Option<&str>,
    output: &OutputArgs,
    command_line: String,
) -> Result<(), CliError> {
    let src = source::load(data)?;
    let j = src.require_joint()?;
    let (importance, target) = match instance {
        Some(raw) => {
            let x = source::parse_codes(raw, j.p())?;
            let imp = pop_local_mdi(j, &x, impurity)?;
            let root = j.impurity_at(impurity, Target::Output, &Assignment::empty())?;
            let leaf = j.impurity_at(
                impurity,
                Target::Output,
                &Assignment::from_instance(VariableSubset::full(j.p()), &x),
            )?;
            (imp, root - leaf)
        }
        None => (pop_global_mdi(j, impurity)?, total_gain(j, impurity)?),
    };
    let names = j.names()[..j.p()].to_vec();
    let mut table = Table::new(&["feature", "score"]);
    table.legend.push(feature_legend(&names));
    for (m, v) in importance.scores.iter().enumerate() {
        table.push(vec![m as f64, *v]);
    }
    let body = json!({
        "features": names,
        "importance": importance,
        "total": importance.total(),
        "expected_total": target,
    });
    let prov = provenance(command_line, data.seed, &src);
    finish(
        Report {
            command: "pop-mdi",
            body,
            table,
        },
        &prov,
        output,
    )
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    max_residual: f64,
    tolerance: f64,
    pass: bool,
}

impl Check {
    fn residual(name: &'static str, max_residual: f64, tolerance: f64) -> Self {
        Check {
            name,
            max_residual,
            tolerance,
            pass: max_residual < tolerance,
        }
    }
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn identity_checks(j: &JointDistribution) -> Result<(Vec<Check>, Value), CliError> {
    let mut checks = Vec::new();
    let global = pop_global_mdi(j, Impurity::Entropy)?;
    let game = game_global_info(j)?;
    let phi = shapley_exact(&game)?;
    checks.push(Check::residual(
        "global-mdi-equals-shapley",
        max_abs_diff(&global.scores, &phi.payoffs),
        SHAPLEY_TOLERANCE,
    ));

    let root = j.impurity_at(Impurity::Entropy, Target::Output, &Assignment::empty())?;
    let (mut local_shapley, mut local_eff) = (0.0f64, 0.0f64);
    for (x, _, local) in pop_local_all(j, Impurity::Entropy)? {
        let phi_x = shapley_exact(&game_local_info(j, &x)?)?;
        local_shapley = local_shapley.max(max_abs_diff(&local.scores, &phi_x.payoffs));
        let leaf = j.impurity_at(
            Impurity::Entropy,
            Target::Output,
            &Assignment::from_instance(VariableSubset::full(j.p()), &x),
        )?;
        local_eff = local_eff.max((local.total() - (root - leaf)).abs());
    }
    checks.push(Check::residual(
        "local-mdi-equals-local-shapley",
        local_shapley,
        SHAPLEY_TOLERANCE,
    ));

    let info = j.mutual_info(Target::Output, VariableSubset::full(j.p()))?;
    checks.push(Check::residual(
        "global-efficiency",
        (global.total() - info).abs(),
        DECOMPOSITION_TOLERANCE,
    ));
    checks.push(Check::residual("local-efficiency", local_eff, DECOMPOSITION_TOLERANCE));

    let dec = check_decompositions(j, Impurity::Entropy)?;
    checks.push(Check::residual(
        "global-is-mean-of-local",
        dec.max_instance_residual(),
        DECOMPOSITION_TOLERANCE,
    ));
    checks.push(Check::residual(
        "double-sum-equals-total",
        dec.double_residual,
        DECOMPOSITION_TOLERANCE,
    ));

    let axioms = check_axioms(&game, &phi);
    let axiom_residual = axioms
        .null_players
        .iter()
        .map(|c| c.payoff.abs())
        .chain(axioms.symmetric_pairs.iter().map(|c| c.payoff_difference))
        .fold(axioms.efficiency_residual, f64::max);
    checks.push(Check {
        name: "shapley-axioms",
        max_residual: axiom_residual,
        tolerance: impshap::game::EFFICIENCY_TOLERANCE,
        pass: axioms.all_pass(),
    });

    let var_global = pop_global_mdi(j, Impurity::Variance)?;
    let var_phi = shapley_exact(&game_global_variance(j)?)?;
    checks.push(Check::residual(
        "variance-mdi-equals-shapley",
        max_abs_diff(&var_global.scores, &var_phi.payoffs),
        SHAPLEY_TOLERANCE,
    ));
    checks.push(Check::residual(
        "variance-efficiency",
        (var_global.total() - total_gain(j, Impurity::Variance)?).abs(),
        DECOMPOSITION_TOLERANCE,
    ));

    let t3 = verify_thm3(j)?;
    let disagreements = t3.features.iter().filter(|f| !f.agree).count();
    checks.push(Check {
        name: "global-local-irrelevance-agree",
        max_residual: disagreements as f64,
        tolerance: 0.0,
        pass: t3.passes(),
    });
    let t4 = verify_thm4(j)?;
    checks.push(Check {
        name: "locally-irrelevant-scores-zero",
        max_residual: t4.max_irrelevant_score,
        tolerance: impshap::relevance::ZERO_SCORE_TOLERANCE,
        pass: t4.passes(),
    });
    let relevance = json!({
        "global_local_agreement": t3,
        "local_irrelevance": t4,
    });
    Ok((checks, relevance))
}

fn monotonicity_block(seed: u64) -> Result<(Value, Check), CliError> {
    let (j1, j2) = (table1_y1(), table1_y2());
    let mi = |j: &JointDistribution, m: usize, given: VariableSubset| j.cond_mutual_info(Target::Output, m, given);
    let none = VariableSubset::empty();
    let (x1, x2) = (VariableSubset::singleton(0), VariableSubset::singleton(1));
    let terms = |j: &JointDistribution| -> Result<Value, CliError> {
        Ok(json!({
            "I(Y;X1)": mi(j, 0, none)?,
            "I(Y;X1|X2)": mi(j, 0, x2)?,
            "I(Y;X2)": mi(j, 1, none)?,
            "I(Y;X2|X1)": mi(j, 1, x1)?,
        }))
    };
    let imp = |j: &JointDistribution| -> Result<Vec<f64>, CliError> {
        Ok(build_forest(&population_dataset(j)?, 2, 1, Impurity::Entropy, seed)?.global_mdi())
    };
    let (i1, i2) = (imp(&j1)?, imp(&j2)?);
    let x1_premise = mi(&j1, 0, none)? >= mi(&j2, 0, none)? && mi(&j1, 0, x2)? >= mi(&j2, 0, x2)?;
    let x2_premise = mi(&j2, 1, none)? >= mi(&j1, 1, none)? && mi(&j2, 1, x1)? >= mi(&j1, 1, x1)?;
    let x1_violated = x1_premise && i1[0] < i2[0];
    let x2_violated = x2_premise && i2[1] < i1[1];
    let shapley =
        |j: &JointDistribution| -> Result<Vec<f64>, CliError> { Ok(shapley_exact(&game_global_info(j)?)?.payoffs) };
    let block = json!({
        "y1": terms(&j1)?,
        "y2": terms(&j2)?,
        "k2_importance_y1": i1,
        "k2_importance_y2": i2,
        "shapley_y1": shapley(&j1)?,
        "shapley_y2": shapley(&j2)?,
        "x1_more_informative_for_y1_everywhere": x1_premise,
        "x1_more_important_for_y2_at_k2": i1[0] < i2[0],
        "x2_more_informative_for_y2_everywhere": x2_premise,
        "x2_more_important_for_y1_at_k2": i2[1] < i1[1],
    });
    let check = Check {
        name: "k2-strong-monotonicity-violation",
        max_residual: 0.0,
        tolerance: 0.0,
        pass: x1_violated && x2_violated,
    };
    Ok((block, check))
}

fn negativity_block(seed: u64, trees: usize) -> Result<(Value, Check), CliError> {
    let j = table2();
    let value = pop_local_mdi(&j, &[0], Impurity::Entropy)?.scores[0];
    let h_y = j.impurity_at(Impurity::Entropy, Target::Output, &Assignment::empty())?;
    let h_y_x = j.impurity_at(
        Impurity::Entropy,
        Target::Output,
        &Assignment::from_instance(VariableSubset::singleton(0), &[0]),
    )?;
    let forest = build_forest(&table2_dataset(), 1, trees, Impurity::Entropy, seed)?;
    let finite = forest.local_mdi(&[vec![0.0]])?.scores[0][0];
    let block = json!({
        "instance": [0],
        "population_local_mdi": value,
        "H(Y)": h_y,
        "H(Y|X1=0)": h_y_x,
        "forest_local_mdi": finite,
        "forest_trees": trees,
    });
    let check = Check {
        name: "local-mdi-can-be-negative",
        max_residual: value,
        tolerance: 0.0,
        pass: value < 0.0 && finite < 0.0,
    };
    Ok((block, check))
}

fn verify(data: &DataArgs, output: &OutputArgs, command_line: String) -> Result<(), CliError> {
    let src = source::load(data)?;
    let j = src.require_joint()?;
    let (mut checks, relevance) = identity_checks(j)?;
    let mut body = json!({ "relevance": relevance });
    if matches!(src.name.as_str(), "table1-y1" | "table1-y2") {
        let (block, check) = monotonicity_block(data.seed)?;
        body["monotonicity"] = block;
        checks.push(check);
    }
    if src.name == "table2" {
        let (block, check) = negativity_block(data.seed, 1000)?;
        body["negativity"] = block;
        checks.push(check);
    }
    let mut table = Table::new(&["check", "max_residual", "tolerance", "pass"]);
    let legend: Vec<String> = checks
        .iter()
        .enumerate()
        .map(|(i, c)| format!("{i}={}", c.name))
        .collect();
    table.legend.push(format!("checks: {}", legend.join(" ")));
    for (i, c) in checks.iter().enumerate() {
        table.push(vec![
            i as f64,
            c.max_residual,
            c.tolerance,
            if c.pass { 1.0 } else { 0.0 },
        ]);
        eprintln!(
            "{} {:<34} residual={:.3e} tolerance={:.0e}",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.max_residual,
            c.tolerance
        );
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
    body["all_pass"] = json!(failed.is_empty());
    body["checks"] = serde_json::to_value(&checks).unwrap();
    let prov = provenance(command_line, data.seed, &src);
    finish(
        Report {
            command: "verify",
            body,
            table,
        },
        &prov,
        output,
    )?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Verification(failed.join(", ")))
    }
}

fn compare(
    src: &Source,
    data: &DataArgs,
    forest: &ForestArgs,
    class: Option<usize>,
    xs: &[Vec<f64>],
    output: &OutputArgs,
    command_line: String,
) -> Result<(), CliError> {
    let names = src.dataset.feature_names();
    let ks = k_values(forest, names.len())?;
    let selector = class.map_or(ClassSelector::Predicted, ClassSelector::Fixed);
    let mut table = Table::new(&[
        "k",
        "pearson_mean",
        "pearson_std",
        "pearson_min",
        "pearson_max",
        "spearman_mean",
        "spearman_std",
        "spearman_min",
        "spearman_max",
        "undefined",
    ]);
    let mut results = Vec::new();
    for k in ks {
        let f = build_forest(&src.dataset, k, forest.trees, forest.impurity, data.seed)?;
        let a = f.local_mdi(xs)?;
        let b = f.saabas(xs, selector)?;
        let r = correlation_report(&a, &b, CorrelationMode::Absolute)?;
        let (p, s) = (&r.pearson_summary, &r.spearman_summary);
        table.push(vec![
            k as f64,
            p.mean,
            p.std,
            p.min,
            p.max,
            s.mean,
            s.std,
            s.min,
            s.max,
            p.undefined.max(s.undefined) as f64,
        ]);
        results.push(json!({ "k": k, "correlation": r }));
    }
    let body = json!({
        "methods": ["local-mdi", "saabas"],
        "mode": CorrelationMode::Absolute,
        "trees": forest.trees,
        "impurity": forest.impurity,
        "instances": xs.len(),
        "results": results,
    });
    let prov = provenance(command_line, data.seed, src);
    finish(
        Report {
            command: "compare",
            body,
            table,
        },
        &prov,
        output,
    )
}

fn gen_data(data: &DataArgs, joint: bool, out: Option<&std::path::Path>, command_line: String) -> Result<(), CliError> {
    let src = source::load(data)?;
    let prov = provenance(command_line, data.seed, &src);
    let comments = prov.comment_lines();
    let mut buf = Vec::new();
    if joint {
        write_joint_csv(src.require_joint()?, &comments, &mut buf)?;
    } else {
        write_csv(&src.dataset, &comments, &mut buf)?;
    }
    emit(&String::from_utf8(buf).expect("CSV output is UTF-8"), out)
}
