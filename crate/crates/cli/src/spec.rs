use std::path::PathBuf;

use ffcm_core::datagen::{
    build_case1, build_case2, build_case3, gen_g2, partition_uniform, Case1Variant, FederatedDataset,
};
use ffcm_core::io::load_dataset;
use ffcm_core::{
    Avg2Seeding, AvgMethod, Centers, ClientState, Dataset, FcmConfig, FedConfig, InitStrategy, KmeansConfig,
    MembershipFormula, SseNorm,
};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Which dataset an experiment runs on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Case {
    Case1Equal,
    Case1Unequal,
    Case2,
    Case3 {
        points_per_client: [usize; 3],
    },
    G2 {
        dim: usize,
        sigma: f64,
        #[serde(default = "default_g2_clients")]
        clients: usize,
    },
    /// Shards loaded from text files; ground truth is optional.
    Custom {
        shards: Vec<PathBuf>,
        #[serde(default)]
        truth: Option<PathBuf>,
    },
}

fn default_g2_clients() -> usize {
    10
}

impl Case {
    /// Ground-truth cluster count, or `None` when it has to come from the spec.
    pub fn default_k(&self) -> Option<usize> {
        match self {
            Case::Case1Equal | Case::Case1Unequal | Case::Case2 => Some(3),
            Case::Case3 { .. } => Some(4),
            Case::G2 { .. } => Some(2),
            Case::Custom { .. } => None,
        }
    }

    pub fn default_m(&self) -> f64 {
        match self {
            Case::Case2 => 1.1,
            _ => 2.0,
        }
    }

    /// Short label used as the `cell` column.
    pub fn label(&self) -> String {
        match self {
            Case::Case1Equal => "case1-equal".into(),
            Case::Case1Unequal => "case1-unequal".into(),
            Case::Case2 => "case2".into(),
            Case::Case3 { points_per_client: [a, b, c] } => format!("case3-{a}-{b}-{c}"),
            Case::G2 { dim, sigma, .. } => format!("g2-{dim}-{sigma}"),
            Case::Custom { .. } => "custom".into(),
        }
    }

    /// Builds the shards for one repetition. G2 data depends only on `base_seed`
    /// (one fixed set per grid cell); its client split follows `run_seed`.
    /// Every other case is regenerated from `run_seed`.
    pub fn build(&self, base_seed: u64, run_seed: u64) -> Result<Prepared> {
        let fd = match self {
            Case::Case1Equal => build_case1(Case1Variant::Equal, run_seed)?,
            Case::Case1Unequal => build_case1(Case1Variant::Unequal, run_seed)?,
            Case::Case2 => build_case2(run_seed)?,
            Case::Case3 { points_per_client } => build_case3(*points_per_client, run_seed)?,
            Case::G2 { dim, sigma, clients } => {
                let (data, truth) = gen_g2(*dim, *sigma, base_seed)?;
                let shards = partition_uniform(&data, *clients, run_seed)?;
                FederatedDataset::new(shards.into_iter().enumerate().collect(), truth)?
            }
            Case::Custom { shards, truth } => {
                if shards.is_empty() {
                    return Err(CliError::Spec("custom case needs at least one shard".into()));
                }
                let shards = shards.iter().map(load_dataset).collect::<std::result::Result<Vec<_>, _>>()?;
                let truth = match truth {
                    Some(p) => Some(Centers::new(load_dataset(p)?.into_inner())?),
                    None => None,
                };
                return Prepared::new(shards, truth);
            }
        };
        Prepared::new(fd.shards.into_iter().map(|(_, d)| d).collect(), Some(fd.ground_truth_centers))
    }
}

/// Shards of one repetition plus their exact union.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub clients: Vec<ClientState>,
    pub gathered: Dataset,
    pub truth: Option<Centers>,
}

impl Prepared {
    pub fn new(shards: Vec<Dataset>, truth: Option<Centers>) -> Result<Self> {
        let gathered = Dataset::concat(&shards.iter().collect::<Vec<_>>())?;
        if let Some(t) = &truth {
            if t.dim() != gathered.dim() {
                return Err(CliError::Spec(format!(
                    "truth has dimension {}, data has {}",
                    t.dim(),
                    gathered.dim()
                )));
            }
        }
        let clients =
            shards.into_iter().enumerate().map(|(client_id, data)| ClientState { client_id, data }).collect();
        Ok(Self { clients, gathered, truth })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Central,
    Avg1,
    Avg2,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Central, Method::Avg1, Method::Avg2];

    pub fn name(self) -> &'static str {
        match self {
            Method::Central => "central",
            Method::Avg1 => "avg1",
            Method::Avg2 => "avg2",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "central" => Ok(Method::Central),
            "avg1" => Ok(Method::Avg1),
            "avg2" => Ok(Method::Avg2),
            _ => Err(CliError::Spec(format!("unknown method {s:?} (expected central, avg1 or avg2)"))),
        }
    }
}

/// Algorithm settings shared by single experiments and the G2 suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Defaults to the case's ground-truth count.
    pub k: Option<usize>,
    /// Defaults to 1.1 for case 2 and 2 elsewhere.
    pub m: Option<f64>,
    pub membership_formula: MembershipFormula,
    pub methods: Vec<Method>,
    pub repetitions: usize,
    pub seed: u64,
    pub local_epochs: usize,
    pub epsilon: f64,
    pub max_iter: usize,
    pub max_rounds: usize,
    pub round_epsilon: f64,
    pub init: InitStrategy,
    pub avg2_seeding: Avg2Seeding,
    pub sse_norm: SseNorm,
}

impl Default for Settings {
    fn default() -> Self {
        let fcm = FcmConfig::default();
        Self {
            k: None,
            m: None,
            membership_formula: fcm.membership_formula,
            methods: Method::ALL.to_vec(),
            repetitions: 10,
            seed: 0,
            local_epochs: 20,
            epsilon: fcm.epsilon,
            max_iter: fcm.max_iter,
            max_rounds: 300,
            round_epsilon: 1e-4,
            init: InitStrategy::default(),
            avg2_seeding: Avg2Seeding::default(),
            sse_norm: SseNorm::default(),
        }
    }
}

impl Settings {
    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(CliError::Spec("repetitions must be >= 1".into()));
        }
        if self.methods.is_empty() {
            return Err(CliError::Spec("no methods selected".into()));
        }
        if self.k == Some(0) {
            return Err(CliError::Spec("k must be >= 1".into()));
        }
        self.fed_config(1, 2.0, 0, AvgMethod::Avg1).validate()?;
        Ok(())
    }

    pub fn fcm_config(&self, m: f64, seed: u64) -> FcmConfig {
        FcmConfig {
            m,
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            membership_formula: self.membership_formula,
            rng_seed: seed,
        }
    }

    pub fn fed_config(&self, k: usize, m: f64, seed: u64, avg_method: AvgMethod) -> FedConfig {
        FedConfig {
            k,
            fcm: self.fcm_config(m, seed),
            avg_method,
            local_epochs: self.local_epochs,
            max_rounds: self.max_rounds,
            round_epsilon: self.round_epsilon,
            init_strategy: self.init,
            inner_kmeans: KmeansConfig { rng_seed: seed, ..KmeansConfig::default() },
            avg2_seeding: self.avg2_seeding,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub case: Case,
    #[serde(default)]
    pub settings: Settings,
}

impl ExperimentSpec {
    pub fn new(case: Case) -> Self {
        Self { case, settings: Settings::default() }
    }

    pub fn k(&self) -> Result<usize> {
        self.settings
            .k
            .or_else(|| self.case.default_k())
            .ok_or_else(|| CliError::Spec("k is required for custom data".into()))
    }

    pub fn m(&self) -> f64 {
        self.settings.m.unwrap_or_else(|| self.case.default_m())
    }

    pub fn validate(&self) -> Result<()> {
        self.settings.validate()?;
        self.settings.fed_config(self.k()?, self.m(), 0, AvgMethod::Avg1).validate()?;
        match &self.case {
            Case::Case3 { points_per_client } if points_per_client.iter().any(|&n| n == 0 || n % 2 == 1) => {
                Err(CliError::Spec("case3 client sizes must be positive and even".into()))
            }
            Case::G2 { dim, sigma, clients }
                if *dim == 0 || *clients == 0 || !sigma.is_finite() || *sigma <= 0.0 =>
            {
                Err(CliError::Spec("g2 needs dim >= 1, clients >= 1 and sigma > 0".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Grid run over G2 datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct G2SuiteSpec {
    pub dims: Vec<usize>,
    pub sigmas: Vec<f64>,
    #[serde(default = "default_g2_clients")]
    pub clients: usize,
    #[serde(default)]
    pub settings: Settings,
}

impl G2SuiteSpec {
    pub fn full() -> Self {
        Self {
            dims: ffcm_core::datagen::G2_DIMS.to_vec(),
            sigmas: ffcm_core::datagen::G2_SIGMAS.to_vec(),
            clients: default_g2_clients(),
            settings: Settings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.sigmas.is_empty() {
            return Err(CliError::Spec("g2 grid needs at least one dim and one sigma".into()));
        }
        self.settings.validate()?;
        for case in self.cells() {
            ExperimentSpec { case, settings: self.settings.clone() }.validate()?;
        }
        Ok(())
    }

    /// Grid cells in (dim, sigma) order.
    pub fn cells(&self) -> Vec<Case> {
        let mut out = Vec::with_capacity(self.dims.len() * self.sigmas.len());
        for &dim in &self.dims {
            for &sigma in &self.sigmas {
                out.push(Case::G2 { dim, sigma, clients: self.clients });
            }
        }
        out
    }
}
