//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::Args;

use herovec::clustering::{
    assign_table, drift_divergence, fit_kmeans_features, select_k, ClusterError, ClusterModel,
    FeatureMatrix,
};
use herovec::encoding::{
    character_vectors_for_table, load_character_csv, write_character_csv, CharacterVector,
    EncodingError,
};
use herovec::evaluation::{
    evaluate, write_curves_csv, write_report_csv, write_summary_csv, EvalError, EvalReport,
    VariantResults,
};
use herovec::match_data::{
    fetch_matches, filter_valid, generate_synthetic, load_match_csv, split_dataset,
    write_match_csv, FetchConfig, MatchDataError, MatchRecord, SyntheticConfig,
};
use herovec::model::{
    init_mlp_custom, load_model, max_hero_id, predict_kills, save_model, train,
    CharacterVectorIndex, Dataset, FeatureSpec, ModelError, TrainConfig, Variant,
};
use herovec::patch_ingest::{
    attach_hero_attributes, load_feature_table, normalize_properties, parse_patch_constants,
    persist_feature_table, AliasMap, IngestError,
};

use crate::manifest::RunManifest;
use crate::Command;

#[derive(Debug)]
pub enum CliError {
    Data(String),
    Network(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(_) => 3,
            CliError::Network(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Data(msg) | CliError::Network(msg) => f.write_str(msg),
        }
    }
}

impl From<MatchDataError> for CliError {
    fn from(e: MatchDataError) -> Self {
        match e {
            MatchDataError::Network { .. } | MatchDataError::RateLimited { .. } => {
                CliError::Network(e.to_string())
            }
            other => CliError::Data(other.to_string()),
        }
    }
}

macro_rules! data_error_from {
    ($($ty:ty),*) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}
data_error_from!(IngestError, ClusterError, EncodingError, ModelError, EvalError, std::io::Error);

pub fn run(command: Command, argv: &[String]) -> Result<(), CliError> {
    match command {
        Command::Ingest(args) => run_ingest(args, argv),
        Command::Cluster(args) => run_cluster(args, argv),
        Command::Encode(args) => run_encode(args, argv),
        Command::Fetch(args) => run_fetch(args, argv),
        Command::Synth(args) => run_synth(args, argv),
        Command::Train(args) => run_train(args, argv),
        Command::Eval(args) => run_eval(args, argv),
        Command::Drift(args) => run_drift(args, argv),
    }
}

fn prepare_out_dir(out_dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", out_dir.display())))
}

#[derive(Args)]
pub struct IngestArgs {
    /// Patch label the constants describe, e.g. 7.31
    #[arg(long)]
    patch: String,
    /// Hero-to-abilities mapping JSON
    #[arg(long)]
    hero_abilities: PathBuf,
    /// Ability properties JSON
    #[arg(long)]
    abilities: PathBuf,
    /// Hero attributes JSON
    #[arg(long)]
    heroes: PathBuf,
    /// Property alias map CSV (source,canonical,sign)
    #[arg(long)]
    alias_map: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn run_ingest(args: IngestArgs, argv: &[String]) -> Result<(), CliError> {
    prepare_out_dir(&args.out_dir)?;
    let aliases = match &args.alias_map {
        Some(path) => AliasMap::from_csv_path(path)?,
        None => AliasMap::empty(),
    };
    let (raw, heroes) =
        parse_patch_constants(&args.hero_abilities, &args.abilities, &args.heroes, &args.patch)?;
    let table = attach_hero_attributes(&normalize_properties(&raw, &aliases), &heroes)?;

    let features_path = args.out_dir.join(format!("features_{}.csv", args.patch));
    persist_feature_table(&table, &features_path)?;

    let ids_path = args.out_dir.join(format!("hero_ids_{}.csv", args.patch));
    let mut id_rows: Vec<(String, String, u32)> = heroes
        .iter()
        .map(|h| (args.patch.clone(), h.character.clone(), h.hero_id))
        .collect();
    id_rows.sort();
    write_hero_ids_csv(&id_rows, &ids_path)?;

    let mut manifest = RunManifest::new("ingest", argv);
    manifest.input(&args.hero_abilities)?;
    manifest.input(&args.abilities)?;
    manifest.input(&args.heroes)?;
    if let Some(path) = &args.alias_map {
        manifest.input(path)?;
    }
    manifest.output(&features_path)?;
    manifest.output(&ids_path)?;
    manifest.write(&args.out_dir.join("manifest_ingest.json"))?;

    println!(
        "ingested patch {}: {} ability rows x {} columns -> {}",
        table.patch,
        table.rows.len(),
        table.columns.len(),
        features_path.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct ClusterArgs {
    /// Feature table CSV; repeat to pool several patches into one fit
    #[arg(long = "features", required = true)]
    features: Vec<PathBuf>,
    /// Fixed cluster count (skips the scan)
    #[arg(long, conflicts_with_all = ["k_min", "k_max"], required_unless_present = "k_min")]
    k: Option<usize>,
    /// Scan lower bound; the K with the best silhouette wins
    #[arg(long, requires = "k_max", required_unless_present = "k")]
    k_min: Option<usize>,
    /// Scan upper bound (inclusive)
    #[arg(long, requires = "k_min")]
    k_max: Option<usize>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    restarts: usize,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn run_cluster(args: ClusterArgs, argv: &[String]) -> Result<(), CliError> {
    prepare_out_dir(&args.out_dir)?;
    let mut tables = Vec::with_capacity(args.features.len());
    for path in &args.features {
        tables.push(load_feature_table(path)?);
    }
    let features = FeatureMatrix::from_tables(&tables);

    let mut manifest = RunManifest::new("cluster", argv);
    manifest.seed("seed", args.seed);
    for path in &args.features {
        manifest.input(path)?;
    }

    let k = match (args.k, args.k_min, args.k_max) {
        (Some(k), _, _) => k,
        (None, Some(k_min), Some(k_max)) => {
            let report = select_k(&features.matrix, k_min, k_max, args.seed, args.restarts)?;
            let selection_path = args.out_dir.join("k_selection.csv");
            report.write_csv(&selection_path)?;
            manifest.output(&selection_path)?;
            println!(
                "selected K={} by silhouette over {}..={} -> {}",
                report.chosen_k,
                k_min,
                k_max,
                selection_path.display()
            );
            report.chosen_k
        }
        _ => unreachable!("clap enforces --k or --k-min/--k-max"),
    };

    let model = fit_kmeans_features(&features, k, args.seed, args.restarts)?;
    let centroids_path = args.out_dir.join("centroids.csv");
    let meta_path = args.out_dir.join("cluster_meta.json");
    model.save(&centroids_path, &meta_path)?;
    manifest.output(&centroids_path)?;
    manifest.output(&meta_path)?;
    manifest.write(&args.out_dir.join("manifest_cluster.json"))?;

    println!(
        "fit K={} on {} abilities x {} columns from patches {:?} ({} zero-variance columns excluded)",
        model.k,
        features.matrix.rows(),
        features.matrix.cols(),
        model.fit_patches,
        model.excluded_columns.len()
    );
    Ok(())
}

#[derive(Args)]
pub struct EncodeArgs {
    /// Centroid CSV written by `cluster`
    #[arg(long)]
    centroids: PathBuf,
    /// Metadata JSON written by `cluster`
    #[arg(long)]
    meta: PathBuf,
    /// Feature table to assign (any patch)
    #[arg(long)]
    features: PathBuf,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn run_encode(args: EncodeArgs, argv: &[String]) -> Result<(), CliError> {
    prepare_out_dir(&args.out_dir)?;
    let model = ClusterModel::load(&args.centroids, &args.meta)?;
    let table = load_feature_table(&args.features)?;
    let labels = assign_table(&model, &table)?;
    let vectors = character_vectors_for_table(&table, &labels, model.k)?;

    let out_path = args.out_dir.join(format!("characters_{}.csv", table.patch));
    write_character_csv(&vectors, model.k, &out_path)?;

    let mut manifest = RunManifest::new("encode", argv);
    manifest.input(&args.centroids)?;
    manifest.input(&args.meta)?;
    manifest.input(&args.features)?;
    manifest.output(&out_path)?;
    manifest.write(&args.out_dir.join("manifest_encode.json"))?;

    println!(
        "encoded {} characters on patch {} into {}-dim count vectors -> {}",
        vectors.len(),
        table.patch,
        model.k,
        out_path.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct FetchArgs {
    /// Patch label to request; repeat for several patches
    #[arg(long = "patch", required = true)]
    patches: Vec<String>,
    #[arg(long, default_value = "https://api.opendota.com")]
    base_url: String,
    #[arg(long)]
    api_key: Option<String>,
    #[arg(long, default_value_t = 1000)]
    page_size: usize,
    /// Rate-limit retries per page before giving up
    #[arg(long, default_value_t = 5)]
    max_retries: u32,
    /// Minimum milliseconds between request starts
    #[arg(long, default_value_t = 1100)]
    min_interval_ms: u64,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn run_fetch(args: FetchArgs, argv: &[String]) -> Result<(), CliError> {
    prepare_out_dir(&args.out_dir)?;
    let config = FetchConfig {
        base_url: args.base_url,
        api_key: args.api_key,
        page_size: args.page_size,
        max_retries: args.max_retries,
        min_request_interval: Duration::from_millis(args.min_interval_ms),
        ..FetchConfig::default()
    };
    let raw = fetch_matches(&config, &args.patches)?;
    let fetched = raw.len();
    let records = filter_valid(raw);

    let out_path = args.out_dir.join("matches.csv");
    write_match_csv(&records, &out_path)?;

    let mut manifest = RunManifest::new("fetch", argv);
    manifest.output(&out_path)?;
    manifest.write(&args.out_dir.join("manifest_fetch.json"))?;

    println!(
        "fetched {fetched} matches for patches {:?}, kept {} after validation -> {}",
        args.patches,
        records.len(),
        out_path.display()
    );
    Ok(())
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 3000)]
    n_matches: usize,
    #[arg(long, default_value_t = 400)]
    n_holdout_matches: usize,
    /// Count-vector dimensionality
    #[arg(long, default_value_t = 12)]
    k: usize,
    #[arg(long, default_value_t = 60)]
    n_characters: usize,
    #[arg(long, default_value_t = 3)]
    n_new_characters: usize,
    #[arg(long, default_value_t = 3)]
    min_abilities: usize,
    #[arg(long, default_value_t = 5)]
    max_abilities: usize,
    /// Comma-separated per-bucket kill coefficients; defaults to the demo
    /// values when k is 12
    #[arg(long)]
    coefficients: Option<String>,
    #[arg(long, default_value_t = 24.0)]
    base_kills: f64,
    #[arg(long, default_value_t = 6.0)]
    duration_coefficient: f64,
    #[arg(long, default_value_t = 2200.0)]
    duration_mean: f64,
    #[arg(long, default_value_t = 400.0)]
    duration_std: f64,
    #[arg(long, default_value_t = 1.5)]
    noise_std: f64,
    #[arg(long, default_value = "7.30")]
    train_patch: String,
    #[arg(long, default_value = "7.33")]
    holdout_patch: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn run_synth(args: SynthArgs, argv: &[String]) -> Result<(), CliError> {
    prepare_out_dir(&args.out_dir)?;
    let coefficients = match &args.coefficients {
        Some(list) => parse_f64_list(list)?,
        None if args.k == 12 => SyntheticConfig::demo(0).coefficients,
        None => {
            return Err(CliError::Data(format!(
                "--coefficients is required when --k is not 12 (got k = {})",
                args.k
            )))
        }
    };
    let config = SyntheticConfig {
        n_matches: args.n_matches,
        n_holdout_matches: args.n_holdout_matches,
        k: args.k,
        n_characters: args.n_characters,
        n_new_characters: args.n_new_characters,
        abilities_per_character: (args.min_abilities, args.max_abilities),
        coefficients,
        base_kills: args.base_kills,
        duration_coefficient: args.duration_coefficient,
        duration_mean_s: args.duration_mean,
        duration_std_s: args.duration_std,
        noise_std: args.noise_std,
        train_patch: args.train_patch,
        holdout_patch: args.holdout_patch,
        seed: args.seed,
    };
    let dataset = generate_synthetic(&config)?;

    let matches_path = args.out_dir.join("matches.csv");
    write_match_csv(&dataset.records, &matches_path)?;

    let characters_path = args.out_dir.join("characters_synth.csv");
    write_character_csv(&dataset.character_vectors, config.k, &characters_path)?;

    let ids_path = args.out_dir.join("hero_ids_synth.csv");
    let name_to_id: BTreeMap<&str, u32> =
        dataset.hero_ids.iter().map(|(name, id)| (name.as_str(), *id)).collect();
    let mut id_rows: Vec<(String, String, u32)> = dataset
        .character_vectors
        .iter()
        .map(|v| (v.patch.clone(), v.character.clone(), name_to_id[v.character.as_str()]))
        .collect();
    id_rows.sort();
    write_hero_ids_csv(&id_rows, &ids_path)?;

    let config_path = args.out_dir.join("synth_config.json");
    let mut text = serde_json::to_string_pretty(&dataset.config).expect("config serializes");
    text.push('\n');
    std::fs::write(&config_path, text)?;

    let mut manifest = RunManifest::new("synth", argv);
    manifest.seed("seed", config.seed);
    manifest.output(&matches_path)?;
    manifest.output(&characters_path)?;
    manifest.output(&ids_path)?;
    manifest.output(&config_path)?;
    manifest.write(&args.out_dir.join("manifest_synth.json"))?;

    println!(
        "generated {} matches ({} on {} + {} on {}) over {} characters -> {}",
        dataset.records.len(),
        config.n_matches,
        config.train_patch,
        config.n_holdout_matches,
        config.holdout_patch,
        config.n_characters + config.n_new_characters,
        matches_path.display()
    );
    Ok(())
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
pub enum VariantArg {
    Nn1,
    Nn2,
    Nn3,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::Nn1 => Variant::Nn1,
            VariantArg::Nn2 => Variant::Nn2,
            VariantArg::Nn3 => Variant::Nn3,
        }
    }
}

#[derive(Args)]
pub struct TrainArgs {
    /// Feature layout: nn1 duration, nn2 +identities, nn3 +cluster counts
    #[arg(long, value_enum)]
    variant: VariantArg,
    /// Match CSV from `fetch` or `synth`
    #[arg(long)]
    matches: PathBuf,
    /// Character count-vector CSV (nn3 only)
    #[arg(long)]
    characters: Option<PathBuf>,
    /// Hero id map CSV (nn3 only); repeat for several patches
    #[arg(long = "hero-ids")]
    hero_ids: Vec<PathBuf>,
    /// Highest encodable character id (nn2 only); defaults to the highest
    /// id in the training split. Raise it to leave room for characters
    /// expected in later patches.
    #[arg(long)]
    id_space: Option<u32>,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    learning_rate: f64,
    /// Comma-separated hidden layer widths
    #[arg(long, default_value = "1024,512,128,64,32,8")]
    hidden: String,
    #[arg(long, default_value_t = 7)]
    split_seed: u64,
    #[arg(long, default_value_t = 0)]
    init_seed: u64,
    #[arg(long, default_value_t = 0)]
    train_seed: u64,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn run_train(args: TrainArgs, argv: &[String]) -> Result<(), CliError> {
    prepare_out_dir(&args.out_dir)?;
    let hidden = parse_usize_list(&args.hidden)?;
    let records = filter_valid(load_match_csv(&args.matches)?);
    let split = split_dataset(&records, args.split_seed)?;
    split.require_training_data()?;

    let variant: Variant = args.variant.into();
    let (spec, index) = build_spec(variant, &split.train, args.id_space, &args)?;

    let train_ds = Dataset::from_matches(&spec, &split.train, index.as_ref())?;
    let val_ds = Dataset::from_matches(&spec, &split.validation, index.as_ref())?;

    let mut model = init_mlp_custom(spec.input_dim(), &hidden, args.init_seed)?;
    let config = TrainConfig {
        epochs: args.epochs,
        learning_rate: args.learning_rate,
        seed: args.train_seed,
        ..TrainConfig::default()
    };
    let history = train(&mut model, &train_ds, &val_ds, &config)?;

    let model_path = args.out_dir.join(format!("model_{}.txt", variant.as_str()));
    save_model(&model, &spec, &model_path)?;
    let curves_path = args.out_dir.join(format!("curves_{}.csv", variant.as_str()));
    write_curves_csv(&history, &curves_path)?;

    let mut manifest = RunManifest::new("train", argv);
    manifest.seed("split_seed", args.split_seed);
    manifest.seed("init_seed", args.init_seed);
    manifest.seed("train_seed", args.train_seed);
    manifest.input(&args.matches)?;
    if let Some(path) = &args.characters {
        manifest.input(path)?;
    }
    for path in &args.hero_ids {
        manifest.input(path)?;
    }
    manifest.output(&model_path)?;
    manifest.output(&curves_path)?;
    manifest.write(&args.out_dir.join(format!("manifest_train_{}.json", variant.as_str())))?;

    let last = history.epochs.last().expect("at least one epoch");
    println!(
        "trained {} ({} inputs, hidden {:?}) on {} matches for {} epochs: \
         train loss {:.6}, val loss {:.6}, val AUC {:.3} -> {}",
        variant.as_str(),
        spec.input_dim(),
        hidden,
        train_ds.len(),
        args.epochs,
        last.train_loss,
        last.val_loss,
        last.val_auc,
        model_path.display()
    );
    Ok(())
}

/// Builds the feature recipe plus, for the count layout, the index it needs.
fn build_spec(
    variant: Variant,
    train_split: &[MatchRecord],
    id_space: Option<u32>,
    args: &TrainArgs,
) -> Result<(FeatureSpec, Option<CharacterVectorIndex>), CliError> {
    match variant {
        Variant::Nn1 => Ok((FeatureSpec::nn1(train_split)?, None)),
        Variant::Nn2 => {
            let bound = match id_space {
                Some(v) => v,
                None => max_hero_id(train_split)
                    .ok_or_else(|| CliError::Data("training split is empty".into()))?,
            };
            Ok((FeatureSpec::nn2(train_split, bound)?, None))
        }
        Variant::Nn3 => {
            let characters = args.characters.as_ref().ok_or_else(|| {
                CliError::Data("nn3 requires --characters <count vector CSV>".into())
            })?;
            if args.hero_ids.is_empty() {
                return Err(CliError::Data("nn3 requires --hero-ids <id map CSV>".into()));
            }
            let (vectors, k) = load_character_csv(characters)?;
            let name_to_id = load_hero_ids_csv(&args.hero_ids)?;
            let index = CharacterVectorIndex::build(&vectors, &name_to_id, k)?;
            Ok((FeatureSpec::nn3(train_split, k)?, Some(index)))
        }
    }
}

#[derive(Args)]
pub struct EvalArgs {
    /// Trained model file; repeat to fill one summary table
    #[arg(long = "model", required = true)]
    models: Vec<PathBuf>,
    /// Match CSV; split with the same seed used for training
    #[arg(long)]
    matches: PathBuf,
    /// Character count-vector CSV (needed for nn3 models)
    #[arg(long)]
    characters: Option<PathBuf>,
    /// Hero id map CSV (needed for nn3 models); repeat for several patches
    #[arg(long = "hero-ids")]
    hero_ids: Vec<PathBuf>,
    #[arg(long, default_value_t = 7)]
    split_seed: u64,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn run_eval(args: EvalArgs, argv: &[String]) -> Result<(), CliError> {
    prepare_out_dir(&args.out_dir)?;
    let records = filter_valid(load_match_csv(&args.matches)?);
    let split = split_dataset(&records, args.split_seed)?;

    let index = match &args.characters {
        Some(path) => {
            let (vectors, k) = load_character_csv(path)?;
            let name_to_id = load_hero_ids_csv(&args.hero_ids)?;
            Some(CharacterVectorIndex::build(&vectors, &name_to_id, k)?)
        }
        None => None,
    };

    let datasets: [(&str, &[MatchRecord]); 3] = [
        ("test", &split.test),
        ("holdout_7.32", &split.holdout_732),
        ("holdout_7.33", &split.holdout_733),
    ];

    let mut summary = Vec::new();
    let mut reports: Vec<EvalReport> = Vec::new();
    for model_path in &args.models {
        let (model, spec) = load_model(model_path)?;
        if spec.variant == Variant::Nn3 && index.is_none() {
            return Err(CliError::Data(format!(
                "{} uses the count layout; pass --characters and --hero-ids",
                model_path.display()
            )));
        }
        let mut aucs = [f64::NAN; 3];
        for (slot, (name, matches)) in datasets.iter().enumerate() {
            if matches.is_empty() {
                continue;
            }
            let ds = Dataset::from_matches(&spec, matches, index.as_ref()).map_err(|e| {
                if let ModelError::IdOutOfRange { .. } = e {
                    CliError::Data(format!(
                        "{e} in the {name} set; retrain with --id-space above every \
                         id the later patches introduce"
                    ))
                } else {
                    e.into()
                }
            })?;
            let mut predictions = Vec::with_capacity(ds.len());
            for x in &ds.features {
                predictions.push(predict_kills(&model, x)?);
            }
            let actuals: Vec<(f64, f64)> = ds.targets.iter().map(|t| (t[0], t[1])).collect();
            let report =
                evaluate(&format!("{} {name}", spec.variant.as_str()), &predictions, &actuals)?;
            aucs[slot] = report.auc;
            reports.push(report);
        }
        summary.push(VariantResults {
            model: spec.variant.as_str().to_string(),
            test_auc: aucs[0],
            test732_auc: aucs[1],
            test733_auc: aucs[2],
        });
    }

    let summary_path = args.out_dir.join("auc_summary.csv");
    write_summary_csv(&summary, &summary_path)?;
    let report_path = args.out_dir.join("eval_report.csv");
    write_report_csv(&reports, &report_path)?;

    let mut manifest = RunManifest::new("eval", argv);
    manifest.seed("split_seed", args.split_seed);
    for path in &args.models {
        manifest.input(path)?;
    }
    manifest.input(&args.matches)?;
    if let Some(path) = &args.characters {
        manifest.input(path)?;
    }
    for path in &args.hero_ids {
        manifest.input(path)?;
    }
    manifest.output(&summary_path)?;
    manifest.output(&report_path)?;
    manifest.write(&args.out_dir.join("manifest_eval.json"))?;

    for row in &summary {
        println!(
            "{}: test {:.3}, holdout 7.32 {:.3}, holdout 7.33 {:.3}",
            row.model, row.test_auc, row.test732_auc, row.test733_auc
        );
    }
    println!("wrote {} and {}", summary_path.display(), report_path.display());
    Ok(())
}

#[derive(Args)]
pub struct DriftArgs {
    /// Character table treated as the baseline
    #[arg(long)]
    reference: PathBuf,
    /// Character table under scrutiny
    #[arg(long)]
    candidate: PathBuf,
    /// Jensen-Shannon divergence above this flags the candidate
    #[arg(long, default_value_t = 0.05)]
    threshold: f64,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

fn run_drift(args: DriftArgs, argv: &[String]) -> Result<(), CliError> {
    prepare_out_dir(&args.out_dir)?;
    let (reference, k_ref) = load_character_csv(&args.reference)?;
    let (candidate, k_cand) = load_character_csv(&args.candidate)?;
    if k_ref != k_cand {
        return Err(CliError::Data(format!(
            "tables disagree on dimensionality: {k_ref} vs {k_cand}"
        )));
    }
    let report = drift_divergence(
        &expand_labels(&reference),
        &expand_labels(&candidate),
        k_ref,
        args.threshold,
    )?;

    let out_path = args.out_dir.join("drift.json");
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    std::fs::write(&out_path, text)?;

    let mut manifest = RunManifest::new("drift", argv);
    manifest.input(&args.reference)?;
    manifest.input(&args.candidate)?;
    manifest.output(&out_path)?;
    manifest.write(&args.out_dir.join("manifest_drift.json"))?;

    println!(
        "JS divergence {:.6} against threshold {}: {} -> {}",
        report.divergence,
        args.threshold,
        if report.flagged { "cluster usage shifted, re-fit advised" } else { "stable" },
        out_path.display()
    );
    Ok(())
}

/// Repeats each cluster index by its count, turning count vectors back into
/// a flat label population for histogram comparison.
fn expand_labels(vectors: &[CharacterVector]) -> Vec<usize> {
    let mut labels = Vec::new();
    for v in vectors {
        for (cluster, &count) in v.counts.iter().enumerate() {
            labels.extend(std::iter::repeat_n(cluster, count as usize));
        }
    }
    labels
}

fn parse_usize_list(list: &str) -> Result<Vec<usize>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| CliError::Data(format!("{s:?} is not a non-negative integer")))
        })
        .collect()
}

fn parse_f64_list(list: &str) -> Result<Vec<f64>, CliError> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|_| CliError::Data(format!("{s:?} is not a number"))))
        .collect()
}

const HERO_IDS_HEADER: [&str; 3] = ["patch", "character", "hero_id"];

fn write_hero_ids_csv(rows: &[(String, String, u32)], path: &Path) -> Result<(), CliError> {
    let err =
        |e: csv::Error| CliError::Data(format!("hero id file {}: {e}", path.display()));
    let mut writer = csv::Writer::from_path(path).map_err(err)?;
    writer.write_record(HERO_IDS_HEADER).map_err(err)?;
    for (patch, character, id) in rows {
        writer.write_record([patch, character, &id.to_string()]).map_err(err)?;
    }
    writer
        .flush()
        .map_err(|e| CliError::Data(format!("hero id file {}: {e}", path.display())))
}

/// Unions several id maps into character -> id; the same character may
/// appear under many patches but must keep one id.
fn load_hero_ids_csv(paths: &[PathBuf]) -> Result<BTreeMap<String, u32>, CliError> {
    let mut name_to_id = BTreeMap::new();
    for path in paths {
        let fail = |detail: String| {
            CliError::Data(format!("hero id file {}: {detail}", path.display()))
        };
        let mut reader = csv::Reader::from_path(path).map_err(|e| fail(e.to_string()))?;
        let headers = reader.headers().map_err(|e| fail(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != HERO_IDS_HEADER {
            return Err(fail(format!(
                "header must be {}, got {headers:?}",
                HERO_IDS_HEADER.join(",")
            )));
        }
        for (i, record) in reader.records().enumerate() {
            let record = record.map_err(|e| fail(e.to_string()))?;
            let character = record[1].to_string();
            let id: u32 = record[2]
                .parse()
                .map_err(|_| fail(format!("row {}: bad id {:?}", i + 2, &record[2])))?;
            if let Some(&existing) = name_to_id.get(&character) {
                if existing != id {
                    return Err(fail(format!(
                        "character {character:?} maps to both {existing} and {id}"
                    )));
                }
            }
            name_to_id.insert(character, id);
        }
    }
    Ok(name_to_id)
}
