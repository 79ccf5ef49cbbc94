//! One function per subcommand; each returns the payload it produced.

use std::path::{Path, PathBuf};

use mlaudit::audits::{
    compare_overfit, omission_audit, underspec_search, OmissionConfig, OverfitThresholds,
    UnderspecConfig,
};
use mlaudit::data::{Dataset, Schema};
use mlaudit::explain::{
    permutation_importance, sample_rows, shapley_summary, ImportanceMetric, ShapleyMode,
    SAMPLED_MAX_FEATURES,
};
use mlaudit::formula::parse_formula;
use mlaudit::models::{
    tune, Family, FittedModel, Learner, ModelDocument, ModelSpec, Predict, Search, SearchSpace,
};
use mlaudit::rng::derive_seed;
use mlaudit::synthgen::{gen_grid_dataset, gen_wall_dataset, GridGenSpec, WallGenSpec};
use mlaudit::validation::{cross_validate, cv_contrast_capped, CvPlan, TunedLearner};
use serde_json::{Map, Value};

use crate::args::*;
use crate::error::{CliError, Result};
use crate::report::{
    ContrastPayload, CvPayload, Payload, ReportDocument, ShapleyPayload, SynthSummary, TunePayload,
};
use crate::svg::render_svg;

fn load_data(args: &DataArgs) -> Result<Dataset> {
    let schema = Schema::load_json(&args.schema)?;
    Ok(Dataset::load_csv(&args.data, schema)?)
}

fn parse_params(params: Option<&str>) -> Result<Map<String, Value>> {
    match params {
        None => Ok(Map::new()),
        Some(text) => match serde_json::from_str::<Value>(text) {
            Ok(Value::Object(m)) => Ok(m),
            Ok(_) => Err(CliError::usage("--params must be a JSON object")),
            Err(e) => Err(CliError::usage(format!("--params is not valid JSON: {e}"))),
        },
    }
}

/// Family from `--model` and `--params`; linear-model params sit at the top level.
pub(crate) fn build_family(kind: ModelKind, params: Option<&str>) -> Result<Family> {
    let params = parse_params(params)?;
    let mut obj = Map::new();
    let name = match kind {
        ModelKind::Lm => "lm",
        ModelKind::Tree => "tree",
        ModelKind::Rf => "rf",
        ModelKind::Svr => "svr",
    };
    obj.insert("family".into(), Value::String(name.into()));
    if kind == ModelKind::Lm {
        obj.extend(params);
    } else {
        obj.insert("params".into(), Value::Object(params));
    }
    serde_json::from_value(Value::Object(obj))
        .map_err(|e| CliError::usage(format!("invalid --params for {name}: {e}")))
}

fn build_spec(
    ds: &Dataset,
    kind: ModelKind,
    formula: Option<&str>,
    features: Option<&[String]>,
    params: Option<&str>,
    seed: u64,
) -> Result<ModelSpec> {
    if let Some(text) = formula {
        if kind != ModelKind::Lm {
            return Err(CliError::usage("--formula applies only to --model lm"));
        }
        if features.is_some() {
            return Err(CliError::usage(
                "--formula and --features are mutually exclusive",
            ));
        }
        if params.is_some() {
            return Err(CliError::usage("--params has no effect with --formula"));
        }
        return Ok(ModelSpec::Lm {
            formula: parse_formula(text)?,
        });
    }
    let features = match features {
        Some(f) if f.is_empty() => return Err(CliError::usage("--features is empty")),
        Some(f) => f.to_vec(),
        None => ds.feature_names(),
    };
    let family = build_family(kind, params)?.with_seed(seed);
    let spec = family.spec(ds.schema().response_name(), &features)?;
    spec.validate(ds)?;
    Ok(spec)
}

fn model_spec(ds: &Dataset, m: &ModelArgs, seed: u64) -> Result<ModelSpec> {
    build_spec(
        ds,
        m.model,
        m.formula.as_deref(),
        m.features.as_deref(),
        m.params.as_deref(),
        seed,
    )
}

fn parse_search(text: &str) -> Result<Option<Search>> {
    match text {
        "none" => Ok(None),
        "grid" => Ok(Some(Search::Grid)),
        other => match other.strip_prefix("random:").map(str::parse::<usize>) {
            Some(Ok(n)) if n > 0 => Ok(Some(Search::Random { n_draws: n })),
            _ => Err(CliError::usage(format!(
                "unknown search `{other}` (expected none, grid or random:N with N > 0)"
            ))),
        },
    }
}

fn parse_plan(text: &str, cap: usize, seed: u64) -> Result<CvPlan> {
    if let Some(k) = text.strip_prefix("kfold:") {
        let k = k
            .parse::<usize>()
            .map_err(|_| CliError::usage(format!("invalid fold count in --plan {text}")))?;
        return Ok(CvPlan::kfold(k, seed));
    }
    if let Some(list) = text.strip_prefix("grouped:") {
        let features: Vec<String> = list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(String::from)
            .collect();
        if features.is_empty() {
            return Err(CliError::usage(
                "--plan grouped: needs at least one feature",
            ));
        }
        return Ok(CvPlan::Grouped {
            features,
            cap,
            seed,
        });
    }
    Err(CliError::usage(format!(
        "unknown plan `{text}` (expected kfold:K or grouped:f1,f2)"
    )))
}

/// The learner a CV command runs: a fixed spec, or a tuner invoked per fold.
enum Prepared {
    Fixed(ModelSpec, Option<mlaudit::models::TuneResult>),
    Nested(TunedLearner),
}

fn prepare(ds: &Dataset, spec: ModelSpec, opts: &TuneOptions, seed: u64) -> Result<Prepared> {
    let search = parse_search(&opts.tune)?;
    match (search, opts.nested) {
        (None, true) => Err(CliError::usage(
            "--nested needs --tune grid or --tune random:N",
        )),
        (None, false) => Ok(Prepared::Fixed(spec, None)),
        (Some(search), false) => {
            let space = SearchSpace::default_for(&spec);
            let result = tune(&spec, &space, search, ds, opts.tune_k, seed)?;
            Ok(Prepared::Fixed(result.best.clone(), Some(result)))
        }
        (Some(search), true) => Ok(Prepared::Nested(TunedLearner {
            space: SearchSpace::default_for(&spec),
            template: spec,
            search,
            folds: opts.tune_k,
            seed,
        })),
    }
}

pub fn synth(cmd: &SynthCommand) -> Result<Payload> {
    let (generator, args) = match cmd {
        SynthCommand::Grid(a) => ("grid", a),
        SynthCommand::Wall(a) => ("wall", a),
    };
    let (ds, spec) = match cmd {
        SynthCommand::Grid(_) => {
            if args.nuisance_correlation.is_some() {
                return Err(CliError::usage(
                    "--nuisance-correlation applies only to synth wall",
                ));
            }
            let mut spec = match &args.spec {
                Some(p) => GridGenSpec::load_json(p)?,
                None => GridGenSpec::default(),
            };
            spec.seed = args.seed;
            (gen_grid_dataset(&spec)?, serde_json::to_value(&spec))
        }
        SynthCommand::Wall(_) => {
            let mut spec = match &args.spec {
                Some(p) => WallGenSpec::load_json(p)?,
                None => WallGenSpec::default(),
            };
            if let Some(rho) = args.nuisance_correlation {
                spec = spec.with_nuisance_correlation(rho);
            }
            spec.seed = args.seed;
            (gen_wall_dataset(&spec)?, serde_json::to_value(&spec))
        }
    };
    let spec = spec.map_err(|e| CliError::json("generator spec", e))?;
    let schema_path = sidecar_path(&args.out);
    ds.save_csv(&args.out)?;
    ds.schema().save_json(&schema_path)?;
    Ok(Payload::Synth(SynthSummary {
        generator: generator.into(),
        spec,
        rows: ds.n_rows(),
        csv: args.out.display().to_string(),
        schema: schema_path.display().to_string(),
    }))
}

/// `data.csv` gets its schema at `data.schema.json`.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("schema.json")
}

pub fn cv(args: &CvArgs) -> Result<Payload> {
    let ds = load_data(&args.data)?;
    let spec = model_spec(&ds, &args.model, args.seed)?;
    let plan = parse_plan(&args.plan, args.cap, args.seed)?;
    let payload = match prepare(&ds, spec, &args.tuning, args.seed)? {
        Prepared::Fixed(spec, tuning) => CvPayload {
            result: cross_validate(&spec, &ds, &plan)?,
            spec,
            tuning,
            nested_tuning: false,
        },
        Prepared::Nested(learner) => CvPayload {
            result: cross_validate(&learner, &ds, &plan)?,
            spec: learner.template,
            tuning: None,
            nested_tuning: true,
        },
    };
    Ok(Payload::Cv(payload))
}

pub fn contrast(args: &ContrastArgs) -> Result<Payload> {
    let ds = load_data(&args.data)?;
    let spec = model_spec(&ds, &args.model, args.seed)?;
    let payload = match prepare(&ds, spec, &args.tuning, args.seed)? {
        Prepared::Fixed(spec, tuning) => ContrastPayload {
            report: cv_contrast_capped(&spec, &ds, &args.groups, args.k, args.seed, args.cap)?,
            spec,
            tuning,
            nested_tuning: false,
        },
        Prepared::Nested(learner) => ContrastPayload {
            report: cv_contrast_capped(&learner, &ds, &args.groups, args.k, args.seed, args.cap)?,
            spec: learner.template,
            tuning: None,
            nested_tuning: true,
        },
    };
    Ok(Payload::Contrast(payload))
}

pub fn audit(cmd: &AuditCommand) -> Result<Payload> {
    match cmd {
        AuditCommand::Omission(a) => omission(a),
        AuditCommand::Underspec(a) => underspec(a),
        AuditCommand::Overfit(a) => overfit(a),
    }
}

fn omission(args: &OmissionArgs) -> Result<Payload> {
    let ds = load_data(&args.data)?;
    let config = OmissionConfig {
        physics: args.physics.clone(),
        omit: args.omit.clone(),
        family: build_family(args.family.model, args.family.params.as_deref())?,
        split_fraction: args.split,
        k: args.k,
        seed: args.seed,
        overfit_margin: args.overfit_margin,
        compensation_threshold: args.compensation_threshold,
        importance_repeats: args.repeats,
    };
    Ok(Payload::Omission(omission_audit(&ds, &config)?))
}

fn underspec(args: &UnderspecArgs) -> Result<Payload> {
    let ds = load_data(&args.data)?;
    let anchors: Vec<&str> = args
        .anchors
        .iter()
        .map(String::as_str)
        .filter(|s| !s.is_empty())
        .collect();
    let candidates: Vec<&str> = args.candidates.iter().map(String::as_str).collect();
    let family = build_family(args.family.model, args.family.params.as_deref())?;
    let config = UnderspecConfig {
        min_gain: args.min_gain,
        split_fraction: args.split,
        cap: args.cap,
        ..UnderspecConfig::new(
            &anchors,
            &candidates,
            args.subset_size,
            args.epsilon,
            family,
            args.seed,
        )
    };
    Ok(Payload::Underspec(underspec_search(&ds, &config)?))
}

fn overfit(args: &OverfitArgs) -> Result<Payload> {
    let contrasts = args
        .inputs
        .iter()
        .map(|path| match ReportDocument::load(path)?.payload {
            Payload::Contrast(c) => Ok(c.report),
            other => Err(CliError::WrongPayload {
                path: path.clone(),
                expected: "contrast".into(),
                found: other.kind().into(),
            }),
        })
        .collect::<Result<Vec<_>>>()?;
    let thresholds = OverfitThresholds {
        fragile: args.fragile,
        stable: args.stable,
    };
    Ok(Payload::Overfit(compare_overfit(&contrasts, thresholds)?))
}

pub fn explain(args: &ExplainArgs) -> Result<Payload> {
    let ds = load_data(&args.data)?;
    let model: FittedModel = match (&args.model_file, args.model) {
        (Some(path), _) => ModelDocument::load(path)?.model,
        (None, Some(kind)) => {
            let spec = build_spec(
                &ds,
                kind,
                args.formula.as_deref(),
                args.features.as_deref(),
                args.params.as_deref(),
                args.seed,
            )?;
            spec.fit(&ds)?
        }
        (None, None) => {
            return Err(CliError::usage(
                "either --model or --model-file is required",
            ))
        }
    };
    match args.method {
        ExplainMethod::Importance => {
            let metric: ImportanceMetric = args
                .metric
                .parse()
                .map_err(|e: mlaudit::Error| CliError::usage(e.to_string()))?;
            let report = permutation_importance(&model, &ds, metric, args.repeats, args.seed)?;
            Ok(Payload::Importance(report))
        }
        ExplainMethod::Shapley => {
            let p = model.features().len();
            if p > SAMPLED_MAX_FEATURES {
                return Err(mlaudit::Error::TooManyFeatures {
                    p,
                    max: SAMPLED_MAX_FEATURES,
                }
                .into());
            }
            let background_rows = sample_rows(ds.n_rows(), args.background, args.seed)?;
            let explained_rows =
                sample_rows(ds.n_rows(), args.max_rows, derive_seed(args.seed, 1))?;
            let background = ds.select_rows(&background_rows)?;
            let explained = ds.select_rows(&explained_rows)?;
            let mode = ShapleyMode::auto(p, args.samples, args.seed);
            let summary = shapley_summary(&model, &explained, &background, mode)?;
            Ok(Payload::Shapley(ShapleyPayload {
                model_id: model_id(&model),
                background_rows,
                explained_rows,
                summary,
            }))
        }
    }
}

fn model_id(model: &FittedModel) -> String {
    let family = match model {
        FittedModel::Linear(_) => "lm",
        FittedModel::Tree(_) => "tree",
        FittedModel::Forest(_) => "rf",
        FittedModel::Svr(_) => "svr",
    };
    format!("{family}[{}]", model.features().join(","))
}

pub fn tune_cmd(args: &TuneArgs) -> Result<Payload> {
    let ds = load_data(&args.data)?;
    let template = model_spec(&ds, &args.model, args.seed)?;
    let search = parse_search(&args.search)?
        .ok_or_else(|| CliError::usage("--search must be grid or random:N"))?;
    let space = match &args.space {
        Some(text) => serde_json::from_str::<SearchSpace>(text)
            .map_err(|e| CliError::usage(format!("--space is not a valid search space: {e}")))?,
        None => SearchSpace::default_for(&template),
    };
    let result = tune(&template, &space, search, &ds, args.k, args.seed)?;
    if let Some(out) = &args.out {
        let fitted = Learner::fit(&result.best, &ds)?;
        ModelDocument::new(ds.schema().response_name(), fitted).save(out)?;
    }
    Ok(Payload::Tune(TunePayload {
        result,
        model_file: args.out.as_ref().map(|p| p.display().to_string()),
    }))
}

pub fn plot(args: &PlotArgs) -> Result<()> {
    let doc = ReportDocument::load(&args.report)?;
    let svg = render_svg(&doc, args.kind)?;
    std::fs::write(&args.out, svg).map_err(|e| CliError::io(&args.out, e))
}
