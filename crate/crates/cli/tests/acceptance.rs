//! Acceptance criteria 1-8. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any criterion fails.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use mlaudit::audits::{omission_audit, underspec_search, OmissionConfig, UnderspecConfig};
use mlaudit::data::{unique_combinations, Column, Dataset, FeatureSchema, Schema};
use mlaudit::explain::{background_sample, shapley_summary, shapley_values, ShapleyMode};
use mlaudit::formula::parse_formula;
use mlaudit::models::{
    Family, FittedModel, ForestParams, Learner, ModelSpec, Mtry, Predict, RandomForest, SvrParams,
    TreeParams,
};
use mlaudit::synthgen::{
    gen_grid_dataset, gen_wall_dataset, GridGenSpec, WallGenSpec, WALL_FEATURES,
};
use mlaudit::validation::{
    cross_validate, cv_contrast, grouped_split, grouped_split_capped, CvPlan,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use serde_json::Value;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

/// Criterion 1: grouped CV exposes the forest but not the reference linear model.
fn grouped_cv_fragility() -> Outcome {
    let groups = strings(&["t", "Lsl"]);
    let lm = ModelSpec::Lm {
        formula: parse_formula("log(Vcr) ~ t + Lsl + t:Lsl").unwrap(),
    };
    let mut passes = 0;
    let mut lines = Vec::new();
    for seed in SEEDS {
        let ds = gen_grid_dataset(&GridGenSpec {
            seed,
            ..GridGenSpec::default()
        })
        .unwrap();
        let rf = ModelSpec::Rf {
            features: ds.feature_names(),
            params: ForestParams {
                n_trees: 50,
                mtry: Mtry::ALL,
                min_leaf: 1,
                seed,
                ..ForestParams::default()
            },
        };
        let rf_c = cv_contrast(&rf, &ds, &groups, 10, seed).unwrap();
        let lm_c = cv_contrast(&lm, &ds, &groups, 10, seed).unwrap();
        let (rf_ratio, lm_ratio) = (
            rf_c.rmse_ratio.unwrap_or(f64::INFINITY),
            lm_c.rmse_ratio.unwrap(),
        );
        let ok = rf_ratio >= 2.0
            && lm_ratio <= 1.5
            && lm_c.adapted.pooled.rmse < rf_c.adapted.pooled.rmse;
        passes += usize::from(ok);
        lines.push(format!(
            "seed {seed}: rf {rf_ratio:.2}, lm {lm_ratio:.3}, adapted rmse lm {:.1} vs rf {:.1}",
            lm_c.adapted.pooled.rmse, rf_c.adapted.pooled.rmse
        ));
    }
    outcome(
        passes >= 4,
        format!("{passes}/5 seeds [{}]", lines.join("; ")),
    )
}

struct Constant(f64);
struct ConstantLearner(f64);

impl Predict for Constant {
    fn predict(&self, ds: &Dataset) -> mlaudit::Result<Vec<f64>> {
        Ok(vec![self.0; ds.n_rows()])
    }
    fn features(&self) -> Vec<String> {
        vec![]
    }
}

impl Learner for ConstantLearner {
    type Model = Constant;
    fn fit(&self, _: &Dataset) -> mlaudit::Result<Constant> {
        Ok(Constant(self.0))
    }
    fn id(&self) -> String {
        "constant".into()
    }
}

/// Rows with 1-3 low-cardinality grouping columns, numeric or categorical.
fn random_dataset() -> impl Strategy<Value = Dataset> {
    (1usize..=3, 2usize..=60, any::<u64>())
        .prop_flat_map(|(g, n, _)| {
            (
                Just(g),
                Just(n),
                prop::collection::vec(any::<bool>(), g),
                prop::collection::vec(prop::collection::vec(0u8..4, n), g),
                prop::collection::vec(-50.0f64..50.0, n),
            )
        })
        .prop_map(|(g, _, categorical, levels, y)| {
            let mut schema = Vec::new();
            let mut columns = Vec::new();
            for j in 0..g {
                let name = format!("g{j}");
                if categorical[j] {
                    schema.push(FeatureSchema::categorical(&name));
                    columns.push(Column::Categorical(
                        levels[j].iter().map(|l| format!("L{l}")).collect(),
                    ));
                } else {
                    schema.push(FeatureSchema::numeric(&name));
                    columns.push(Column::Numeric(
                        levels[j].iter().map(|&l| l as f64 * 0.5).collect(),
                    ));
                }
            }
            schema.push(FeatureSchema::response("y"));
            columns.push(Column::Numeric(y));
            Dataset::new(Schema::new(schema).unwrap(), columns, "random").unwrap()
        })
}

fn check_partition(ds: &Dataset) -> std::result::Result<(), TestCaseError> {
    let features = ds.feature_names();
    let combos = unique_combinations(ds, &features).unwrap();
    if combos.len() < 2 {
        prop_assert!(grouped_split(ds, &features).is_err());
        return Ok(());
    }
    let split = grouped_split(ds, &features).unwrap();
    prop_assert_eq!(split.split.folds.len(), combos.len());
    let mut seen = BTreeSet::new();
    for (fold, (key, count)) in split.split.folds.iter().zip(&combos) {
        prop_assert_eq!(fold.len(), *count);
        for &row in fold {
            prop_assert!(seen.insert(row), "row {} in two folds", row);
            let values: Vec<_> = features.iter().map(|f| ds.value(row, f).unwrap()).collect();
            prop_assert_eq!(&values, &key.values);
        }
    }
    prop_assert_eq!(seen.len(), ds.n_rows());

    // Merging under a cap never splits a combination.
    let capped = grouped_split_capped(ds, &features, 2, 7).unwrap();
    prop_assert_eq!(capped.split.folds.len(), 2.min(combos.len()));
    for fold in &capped.split.folds {
        for &row in fold {
            let key: Vec<_> = features.iter().map(|f| ds.value(row, f).unwrap()).collect();
            let fold_rows: usize = fold
                .iter()
                .filter(|&&r| {
                    features
                        .iter()
                        .map(|f| ds.value(r, f).unwrap())
                        .collect::<Vec<_>>()
                        == key
                })
                .count();
            let total = combos.iter().find(|(k, _)| k.values == key).unwrap().1;
            prop_assert_eq!(fold_rows, total);
        }
    }

    let k = 2.min(ds.n_rows());
    let c = cv_contrast(&ConstantLearner(0.25), ds, &features, k, 3).unwrap();
    prop_assert_eq!(c.rmse_ratio, Some(1.0));
    Ok(())
}

/// Criterion 2: grouped split partition laws and the constant-model ratio.
fn grouped_cv_correctness() -> Outcome {
    let mut runner = TestRunner::new(Config {
        cases: 200,
        failure_persistence: None,
        ..Config::default()
    });
    match runner.run(&random_dataset(), |ds| check_partition(&ds)) {
        Ok(()) => outcome(
            true,
            "200 random datasets: one fold per combination, exact partition, constant ratio = 1",
        ),
        Err(e) => outcome(false, format!("property failed: {e}")),
    }
}

/// Criterion 3: omitting nu_max makes the forest overfit, and top-k refits cannot compensate.
fn omission_direction() -> Outcome {
    let mut passes = 0;
    let mut lines = Vec::new();
    for seed in SEEDS {
        let ds = gen_wall_dataset(&WallGenSpec {
            seed,
            ..WallGenSpec::default()
        })
        .unwrap();
        let family = Family::Rf {
            params: ForestParams::default(),
        };
        let cfg = OmissionConfig::new(&["lambda_b", "nu_max"], "nu_max", family, seed);
        let r = omission_audit(&ds, &cfg).unwrap();
        let ok = r.gap_excess >= 0.10 && r.rmse_improvement_c_over_b < 0.05;
        passes += usize::from(ok);
        lines.push(format!(
            "seed {seed}: gap excess {:.3}, C over B {:+.3}",
            r.gap_excess, r.rmse_improvement_c_over_b
        ));
    }
    outcome(
        passes >= 3,
        format!("{passes}/5 seeds [{}]", lines.join("; ")),
    )
}

fn underspec_flag(rho: f64, epsilon: f64, seed: u64) -> (bool, usize) {
    let ds = gen_wall_dataset(
        &WallGenSpec {
            seed,
            ..WallGenSpec::default()
        }
        .with_nuisance_correlation(rho),
    )
    .unwrap();
    let family = Family::Rf {
        params: ForestParams::default(),
    };
    let cfg = UnderspecConfig::new(&["lambda_b"], &WALL_FEATURES[2..], 4, epsilon, family, seed);
    let r = underspec_search(&ds, &cfg).unwrap();
    (r.underspecified, r.near_equivalent.len())
}

/// Criterion 4: correlated nuisance features make the subset search underspecified.
fn underspec_detection() -> Outcome {
    let correlated: Vec<(bool, usize)> = SEEDS
        .iter()
        .map(|&s| underspec_flag(0.7, 0.05, s))
        .collect();
    let independent: Vec<(bool, usize)> = SEEDS
        .iter()
        .map(|&s| underspec_flag(0.0, 0.02, s))
        .collect();
    let hits = correlated.iter().filter(|(f, _)| *f).count();
    let false_alarms = independent.iter().filter(|(f, _)| *f).count();
    // With five seeds the median seed is unflagged exactly when most seeds are.
    let pass = hits >= 4 && false_alarms <= 2;
    outcome(
        pass,
        format!(
            "rho 0.7, eps 0.05: flagged {hits}/5 (near-equivalent sizes {:?}); rho 0, eps 0.02: flagged {false_alarms}/5",
            correlated.iter().map(|(_, n)| n).collect::<Vec<_>>()
        ),
    )
}

fn small_wall() -> Dataset {
    let full = gen_wall_dataset(&WallGenSpec {
        seed: 11,
        ..WallGenSpec::default()
    })
    .unwrap();
    let keep = ["lambda_b", "nu_max", "s_db", "Ash_ratio"];
    let mut schema: Vec<FeatureSchema> = keep.iter().map(|f| FeatureSchema::numeric(*f)).collect();
    schema.push(FeatureSchema::response("drift"));
    let mut columns: Vec<Column> = keep
        .iter()
        .map(|f| full.column(f).unwrap().clone())
        .collect();
    columns.push(Column::Numeric(full.response().to_vec()));
    Dataset::new(Schema::new(schema).unwrap(), columns, "wall subset").unwrap()
}

/// `f(a, b, c) = a*b + sin(a + b) + c`, symmetric in `a` and `b`.
struct Symmetric;

impl Predict for Symmetric {
    fn predict(&self, ds: &Dataset) -> mlaudit::Result<Vec<f64>> {
        let (a, b, c) = (ds.numeric("a")?, ds.numeric("b")?, ds.numeric("c")?);
        Ok((0..ds.n_rows())
            .map(|i| a[i] * b[i] + (a[i] + b[i]).sin() + c[i])
            .collect())
    }
    fn features(&self) -> Vec<String> {
        strings(&["a", "b", "c"])
    }
}

/// Lists `b` as a feature but never reads it.
struct IgnoresB;

impl Predict for IgnoresB {
    fn predict(&self, ds: &Dataset) -> mlaudit::Result<Vec<f64>> {
        let (a, c) = (ds.numeric("a")?, ds.numeric("c")?);
        Ok((0..ds.n_rows()).map(|i| 2.0 * a[i] + c[i] * c[i]).collect())
    }
    fn features(&self) -> Vec<String> {
        strings(&["a", "b", "c"])
    }
}

fn abc_dataset(n: usize) -> Dataset {
    let a: Vec<f64> = (0..n).map(|i| ((i * 37) % 23) as f64 / 7.0 - 1.5).collect();
    let c: Vec<f64> = (0..n).map(|i| ((i * 11) % 17) as f64 / 5.0).collect();
    let y: Vec<f64> = a.iter().zip(&c).map(|(x, z)| x + z).collect();
    let schema = Schema::new(vec![
        FeatureSchema::numeric("a"),
        FeatureSchema::numeric("b"),
        FeatureSchema::numeric("c"),
        FeatureSchema::response("y"),
    ])
    .unwrap();
    // b equals a row by row, so swapping the two players leaves every v(S) unchanged.
    Dataset::new(
        schema,
        vec![
            Column::Numeric(a.clone()),
            Column::Numeric(a),
            Column::Numeric(c),
            Column::Numeric(y),
        ],
        "abc",
    )
    .unwrap()
}

/// Criterion 5: Shapley efficiency, symmetry, dummy and the linear closed form.
fn shapley_axioms() -> Outcome {
    const TOL: f64 = 1e-9;
    let ds = small_wall();
    let features = ds.feature_names();
    let background = background_sample(&ds, 16, 5).unwrap();
    let instances = ds.select_rows(&(0..50).collect::<Vec<_>>()).unwrap();
    let families = [
        Family::Lm {
            log_response: false,
        },
        Family::Tree {
            params: TreeParams::default(),
        },
        Family::Rf {
            params: ForestParams {
                n_trees: 30,
                ..ForestParams::default()
            },
        },
        Family::Svr {
            params: SvrParams::default(),
        },
    ];
    let mut worst_eff = 0.0f64;
    let mut lm_err = 0.0f64;
    for fam in &families {
        let model = fam.spec("drift", &features).unwrap().fit(&ds).unwrap();
        for row in 0..instances.n_rows() {
            let e =
                shapley_values(&model, &instances, row, &background, ShapleyMode::Exact).unwrap();
            worst_eff = worst_eff.max(e.efficiency_gap());
            if let FittedModel::Linear(lm) = &model {
                for (j, f) in features.iter().enumerate() {
                    let col = lm.fit.column_names.iter().position(|c| c == f).unwrap();
                    let beta = lm.coefficients()[col];
                    let bg = background.numeric(f).unwrap();
                    let mean = bg.iter().sum::<f64>() / bg.len() as f64;
                    let analytic = beta * (instances.numeric(f).unwrap()[row] - mean);
                    lm_err = lm_err.max((e.phi[j] - analytic).abs());
                }
            }
        }
    }

    let abc = abc_dataset(60);
    let bg = background_sample(&abc, 16, 1).unwrap();
    let inst = abc.select_rows(&(0..50).collect::<Vec<_>>()).unwrap();
    let mut sym_err = 0.0f64;
    let mut dummy_err = 0.0f64;
    for row in 0..50 {
        let s = shapley_values(&Symmetric, &inst, row, &bg, ShapleyMode::Exact).unwrap();
        sym_err = sym_err.max((s.phi[0] - s.phi[1]).abs());
        let d = shapley_values(&IgnoresB, &inst, row, &bg, ShapleyMode::Exact).unwrap();
        dummy_err = dummy_err.max(d.phi[1].abs());
    }

    // A forest over a training-constant column never splits on it.
    let mut constant = ds.clone();
    constant = constant
        .replace_column("Ash_ratio", Column::Numeric(vec![1.0; ds.n_rows()]))
        .unwrap();
    let forest = RandomForest::fit(
        &constant,
        &features,
        ForestParams {
            n_trees: 20,
            ..ForestParams::default()
        },
    )
    .unwrap();
    let summary = shapley_summary(&forest, &instances, &background, ShapleyMode::Exact).unwrap();
    let forest_dummy = summary
        .feature("Ash_ratio")
        .unwrap()
        .phi
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    dummy_err = dummy_err.max(forest_dummy);

    let pass = worst_eff <= TOL && sym_err <= TOL && dummy_err <= TOL && lm_err <= TOL;
    outcome(
        pass,
        format!(
            "50 instances x 4 families: max efficiency gap {worst_eff:.2e}, symmetry {sym_err:.2e}, dummy {dummy_err:.2e}, linear closed form {lm_err:.2e}"
        ),
    )
}

/// Criterion 6: OLS, SVR and interpolating tree solver checks.
fn solver_correctness() -> Outcome {
    let spec = GridGenSpec {
        noise_sd: 0.0,
        seed: 2,
        ..GridGenSpec::default()
    };
    let ds = gen_grid_dataset(&spec).unwrap();
    let lm = mlaudit::models::LinearModel::fit(
        &parse_formula("log(Vcr) ~ t + Lsl + t:Lsl").unwrap(),
        &ds,
    )
    .unwrap();
    let law = [spec.law.b0, spec.law.b1, spec.law.b2, spec.law.b3];
    let ols_err = ["(Intercept)", "t", "Lsl", "t:Lsl"]
        .iter()
        .zip(law)
        .map(|(name, b)| {
            let j = lm.fit.column_names.iter().position(|c| c == name).unwrap();
            (lm.coefficients()[j] - b).abs()
        })
        .fold(0.0f64, f64::max);

    let wall = small_wall();
    let features = wall.feature_names();
    let mut svr_worst = f64::NEG_INFINITY;
    for params in [
        SvrParams::default(),
        SvrParams {
            c: 10.0,
            gamma: 0.5,
            epsilon: 0.05,
            ..SvrParams::default()
        },
    ] {
        let m = mlaudit::models::KernelSvr::fit(&wall, &features, params).unwrap();
        svr_worst = svr_worst.max(m.final_violation - m.params.tol);
    }

    let full = gen_wall_dataset(&WallGenSpec::default()).unwrap();
    let tree =
        mlaudit::models::RegressionTree::fit(&full, &full.feature_names(), TreeParams::default())
            .unwrap();
    let fitted = tree.predict(&full).unwrap();
    let exact = fitted.iter().zip(full.response()).all(|(a, b)| a == b);

    let pass = ols_err <= 1e-8 && svr_worst <= 0.0 && exact;
    outcome(
        pass,
        format!(
            "OLS max coefficient error {ols_err:.2e}; SVR violation minus tol {svr_worst:.2e}; tree reproduces training rows exactly: {exact}"
        ),
    )
}

fn fingerprint(threads: usize) -> String {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap();
    pool.install(|| {
        let grid = gen_grid_dataset(&GridGenSpec {
            seed: 9,
            ..GridGenSpec::default()
        })
        .unwrap();
        let wall = gen_wall_dataset(&WallGenSpec {
            seed: 9,
            ..WallGenSpec::default()
        })
        .unwrap();
        let params = ForestParams {
            n_trees: 25,
            seed: 9,
            ..ForestParams::default()
        };
        let forest = RandomForest::fit(&wall, &wall.feature_names(), params).unwrap();
        let spec = ModelSpec::Rf {
            features: wall.feature_names(),
            params,
        };
        let kfold = cross_validate(&spec, &wall, &CvPlan::kfold(5, 9)).unwrap();
        let grouped = cv_contrast(
            &spec,
            &grid.select_rows(&(0..600).collect::<Vec<_>>()).unwrap(),
            &strings(&["t", "Lsl"]),
            5,
            9,
        );
        let background = background_sample(&wall, 16, 9).unwrap();
        let explained = wall.select_rows(&(0..8).collect::<Vec<_>>()).unwrap();
        let sampled = shapley_summary(
            &forest,
            &explained,
            &background,
            ShapleyMode::Sampled {
                n_samples: 64,
                seed: 9,
            },
        )
        .unwrap();
        let parts: Vec<Value> = vec![
            serde_json::Value::String(grid.to_csv_string()),
            serde_json::Value::String(wall.to_csv_string()),
            serde_json::to_value(&forest).unwrap(),
            serde_json::to_value(&kfold).unwrap(),
            serde_json::to_value(grouped.ok()).unwrap(),
            serde_json::to_value(&sampled).unwrap(),
        ];
        serde_json::to_string(&parts).unwrap()
    })
}

/// Criterion 7: stochastic pipelines are bit-identical across runs and thread counts.
fn determinism() -> Outcome {
    let a = fingerprint(1);
    let b = fingerprint(1);
    let c = fingerprint(4);
    outcome(
        a == b && a == c,
        format!(
            "forest, k-fold and grouped CV, sampled Shapley, both generators: repeat equal {}, 1 vs 4 threads equal {}",
            a == b,
            a == c
        ),
    )
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_mlaudit"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{:?} exited {:?}: {}",
            args,
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn validate_report(validator: &jsonschema::Validator, path: &Path) -> Result<(), String> {
    let doc: Value =
        serde_json::from_str(&std::fs::read_to_string(path).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let errors: Vec<String> = validator.iter_errors(&doc).map(|e| e.to_string()).collect();
    if errors.is_empty() {
        Ok(())
    } else {
        Err(format!(
            "{} violates the schema: {errors:?}",
            path.display()
        ))
    }
}

fn parse_svg(path: &Path) -> Result<usize, String> {
    let text = std::fs::read_to_string(path).map_err(|e| e.to_string())?;
    let doc = roxmltree::Document::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if doc.root_element().tag_name().name() != "svg" {
        return Err(format!("{} has no svg root", path.display()));
    }
    Ok(doc.descendants().count())
}

fn pipeline(
    dir: &Path,
    generator: &str,
    validator: &jsonschema::Validator,
) -> Result<String, String> {
    let s = |p: &Path| p.display().to_string();
    let csv = dir.join(format!("{generator}.csv"));
    let schema = dir.join(format!("{generator}.schema.json"));
    run_cli(&["synth", generator, "--seed", "7", "--out", &s(&csv)])?;
    let (groups, physics, omit) = match generator {
        "grid" => ("t,Lsl", "t,Lsl", "Lsl"),
        _ => ("lambda_b", "lambda_b,nu_max", "nu_max"),
    };
    let contrast = dir.join(format!("{generator}-contrast.json"));
    run_cli(&[
        "contrast",
        "--data",
        &s(&csv),
        "--schema",
        &s(&schema),
        "--model",
        "rf",
        "--params",
        r#"{"n_trees": 10}"#,
        "--groups",
        groups,
        "--k",
        "10",
        "--seed",
        "1",
        "--report",
        &s(&contrast),
    ])?;
    validate_report(validator, &contrast)?;
    let boxplot = dir.join(format!("{generator}-box.svg"));
    run_cli(&[
        "plot",
        "--report",
        &s(&contrast),
        "--kind",
        "group-boxplot",
        "--out",
        &s(&boxplot),
    ])?;
    let box_nodes = parse_svg(&boxplot)?;

    let omission = dir.join(format!("{generator}-omission.json"));
    run_cli(&[
        "audit",
        "omission",
        "--data",
        &s(&csv),
        "--schema",
        &s(&schema),
        "--model",
        "rf",
        "--params",
        r#"{"n_trees": 20}"#,
        "--physics",
        physics,
        "--omit",
        omit,
        "--seed",
        "1",
        "--report",
        &s(&omission),
    ])?;
    validate_report(validator, &omission)?;
    let scatter = dir.join(format!("{generator}-scatter.svg"));
    run_cli(&[
        "plot",
        "--report",
        &s(&omission),
        "--kind",
        "pred-scatter",
        "--out",
        &s(&scatter),
    ])?;
    let scatter_nodes = parse_svg(&scatter)?;
    Ok(format!(
        "{generator}: boxplot {box_nodes} nodes, scatter {scatter_nodes} nodes"
    ))
}

/// Criterion 8: synth, contrast, audit and plot end to end through the binary.
fn end_to_end_cli() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let schema_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/report.schema.json");
    let schema: Value =
        serde_json::from_str(&std::fs::read_to_string(schema_path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let results: Vec<Result<String, String>> = ["grid", "wall"]
        .iter()
        .map(|g| pipeline(dir.path(), g, &validator))
        .collect();
    let pass = results.iter().all(Result::is_ok);
    let detail: Vec<String> = results
        .into_iter()
        .map(|r| r.unwrap_or_else(|e| e))
        .collect();
    outcome(pass, detail.join("; "))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("grouped-CV fragility direction", grouped_cv_fragility),
        ("grouped-CV correctness", grouped_cv_correctness),
        ("omission audit direction", omission_direction),
        ("underspecification detection", underspec_detection),
        ("Shapley axioms", shapley_axioms),
        ("solver correctness", solver_correctness),
        ("determinism", determinism),
        ("end-to-end CLI", end_to_end_cli),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        failed += usize::from(!result.pass);
        println!(
            "criterion {}: {} {name} ({:.1}s) {}",
            i + 1,
            if result.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            result.detail
        );
    }
    if failed > 0 {
        println!("{failed} of 8 criteria failed");
        std::process::exit(1);
    }
    println!("all 8 criteria passed");
}
