//! Genetic wrapper search over feature subsets, scored by the cross-validated
//! accuracy of Naive Bayes on the projected data.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{cv_evaluate, ClassifierError, ClassifierSpec};
use crate::dataset::{project, stratified_folds, Dataset, DatasetError, FeatureSubset, FoldPlan};
use crate::scoring::FeatureRanking;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("no candidate features to search")]
    NoCandidates,
    #[error("invalid GA parameters: {0}")]
    Params(String),
    #[error("chromosome selects no features")]
    EmptyChromosome,
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

pub type Result<T> = std::result::Result<T, SearchError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Seeding {
    /// Half the population are top-m prefixes of the ranking, the rest random.
    #[default]
    Ranked,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaParams {
    pub population_size: usize,
    pub max_generations: usize,
    pub crossover_prob: f64,
    pub mutation_prob: f64,
    pub elitism: usize,
    pub seed: u64,
    pub fitness_folds: usize,
    pub seeding: Seeding,
}

impl Default for GaParams {
    fn default() -> Self {
        GaParams {
            population_size: 20,
            max_generations: 20,
            crossover_prob: 0.6,
            mutation_prob: 0.033,
            elitism: 1,
            seed: 1,
            fitness_folds: 5,
            seeding: Seeding::Ranked,
        }
    }
}

impl GaParams {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(SearchError::Params(m));
        if self.population_size < 2 {
            return err(format!("population_size {} < 2", self.population_size));
        }
        if self.elitism >= self.population_size {
            return err(format!("elitism {} >= population_size", self.elitism));
        }
        for (name, p) in [("crossover_prob", self.crossover_prob), ("mutation_prob", self.mutation_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return err(format!("{name} {p} outside [0, 1]"));
            }
        }
        if self.fitness_folds < 2 {
            return err(format!("fitness_folds {} < 2", self.fitness_folds));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chromosome {
    pub genes: Vec<bool>,
    pub fitness: Option<f64>,
}

impl Chromosome {
    fn new(genes: Vec<bool>) -> Self {
        Chromosome { genes, fitness: None }
    }

    pub fn size(&self) -> usize {
        self.genes.iter().filter(|&&g| g).count()
    }
}

/// Candidate features (ascending original indices) and their rank order.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    width: usize,
    candidates: Vec<usize>,
    /// Gene positions, best-ranked first.
    rank_order: Vec<usize>,
}

impl SearchSpace {
    pub fn new(ranking: &FeatureRanking, candidates: &FeatureSubset) -> Result<Self> {
        let cand = candidates.indices();
        if cand.is_empty() {
            return Err(SearchError::NoCandidates);
        }
        let gene_of: HashMap<usize, usize> = cand.iter().enumerate().map(|(g, &f)| (f, g)).collect();
        let rank_order = ranking.order.iter().filter_map(|f| gene_of.get(f).copied()).collect();
        Ok(SearchSpace {
            width: candidates.width(),
            candidates: cand,
            rank_order,
        })
    }

    /// Every feature is a candidate; rank order is index order.
    pub fn unranked(width: usize) -> Result<Self> {
        if width == 0 {
            return Err(SearchError::NoCandidates);
        }
        Ok(SearchSpace {
            width,
            candidates: (0..width).collect(),
            rank_order: (0..width).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    /// Maps genes back onto the full feature index space.
    pub fn to_subset(&self, genes: &[bool]) -> FeatureSubset {
        let idx: Vec<usize> = genes
            .iter()
            .zip(&self.candidates)
            .filter_map(|(&g, &f)| g.then_some(f))
            .collect();
        FeatureSubset::from_indices(self.width, &idx)
    }
}

fn repair(genes: &mut [bool], rng: &mut ChaCha8Rng) {
    if !genes.iter().any(|&g| g) {
        let i = rng.gen_range(0..genes.len());
        genes[i] = true;
    }
}

fn random_chromosome(n: usize, rng: &mut ChaCha8Rng) -> Chromosome {
    let mut genes: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
    repair(&mut genes, rng);
    Chromosome::new(genes)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Initial population. With ranked seeding, `ceil(pop / 2)` members select
/// the top-m ranked candidates for m spread evenly over `[1, N]`.
pub fn seed_population(space: &SearchSpace, params: &GaParams) -> Vec<Chromosome> {
    let mut rng = stream(params.seed, 1);
    let n = space.len();
    let pop = params.population_size;
    let prefixes = match params.seeding {
        Seeding::Ranked => pop.div_ceil(2),
        Seeding::Random => 0,
    };
    let mut out = Vec::with_capacity(pop);
    for i in 0..prefixes {
        let m = if prefixes == 1 {
            n
        } else {
            1 + ((i * (n - 1)) as f64 / (prefixes - 1) as f64).round() as usize
        };
        let mut genes = vec![false; n];
        for &g in &space.rank_order[..m] {
            genes[g] = true;
        }
        out.push(Chromosome::new(genes));
    }
    while out.len() < pop {
        out.push(random_chromosome(n, &mut rng));
    }
    out
}

/// Memoized NB cross-validation accuracy on a fixed fold plan.
pub struct WrapperFitness<'a> {
    data: &'a Dataset,
    folds: FoldPlan,
    cache: Mutex<HashMap<FeatureSubset, f64>>,
    fits: AtomicUsize,
}

impl<'a> WrapperFitness<'a> {
    pub fn new(data: &'a Dataset, folds: usize, seed: u64) -> Result<Self> {
        let k = folds.min(data.len());
        let folds = stratified_folds(data, k.max(2), seed)?;
        Ok(WrapperFitness {
            data,
            folds,
            cache: Mutex::new(HashMap::new()),
            fits: AtomicUsize::new(0),
        })
    }

    pub fn folds(&self) -> &FoldPlan {
        &self.folds
    }

    /// Number of NB models fitted so far.
    pub fn model_fits(&self) -> usize {
        self.fits.load(AtomicOrdering::Relaxed)
    }

    /// Distinct subsets scored so far.
    pub fn evaluations(&self) -> usize {
        self.cache.lock().expect("fitness cache poisoned").len()
    }

    pub fn cached(&self, subset: &FeatureSubset) -> Option<f64> {
        self.cache.lock().expect("fitness cache poisoned").get(subset).copied()
    }

    pub fn evaluate(&self, subset: &FeatureSubset) -> Result<f64> {
        if subset.is_empty() {
            return Err(SearchError::EmptyChromosome);
        }
        if let Some(f) = self.cached(subset) {
            return Ok(f);
        }
        let projected = project(self.data, subset)?;
        let result = cv_evaluate(&ClassifierSpec::NaiveBayes, &projected, &self.folds)?;
        self.fits.fetch_add(self.folds.k(), AtomicOrdering::Relaxed);
        let acc = result.accuracy();
        self.cache
            .lock()
            .expect("fitness cache poisoned")
            .insert(subset.clone(), acc);
        Ok(acc)
    }
}

/// NB cross-validation accuracy of one chromosome over `space`.
pub fn wrapper_fitness(c: &Chromosome, space: &SearchSpace, d: &Dataset, params: &GaParams) -> Result<f64> {
    WrapperFitness::new(d, params.fitness_folds, params.seed)?.evaluate(&space.to_subset(&c.genes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub population: usize,
    /// Fewest features selected by any member.
    pub smallest: usize,
    /// Best chromosome of the generation, as original feature indices.
    pub best_features: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub candidates: Vec<usize>,
    pub generations: Vec<GenerationStats>,
    /// Distinct subsets whose fitness was computed.
    pub evaluations: usize,
    pub best_fitness: f64,
}

/// Higher fitness first, then fewer features, then the smaller bitmask.
fn rank_cmp(a: &Chromosome, b: &Chromosome) -> Ordering {
    let fa = a.fitness.unwrap_or(f64::NEG_INFINITY);
    let fb = b.fitness.unwrap_or(f64::NEG_INFINITY);
    fb.total_cmp(&fa)
        .then(a.size().cmp(&b.size()))
        .then(a.genes.cmp(&b.genes))
}

fn evaluate_population(pop: &mut [Chromosome], space: &SearchSpace, fitness: &WrapperFitness) -> Result<()> {
    let mut pending: Vec<FeatureSubset> = Vec::new();
    let mut seen = HashSet::new();
    for c in pop.iter() {
        let s = space.to_subset(&c.genes);
        if fitness.cached(&s).is_none() && seen.insert(s.clone()) {
            pending.push(s);
        }
    }
    pending
        .par_iter()
        .map(|s| fitness.evaluate(s).map(|_| ()))
        .collect::<Result<Vec<()>>>()?;
    for c in pop.iter_mut() {
        c.fitness = Some(fitness.evaluate(&space.to_subset(&c.genes))?);
    }
    Ok(())
}

fn roulette<'p>(pop: &'p [Chromosome], rng: &mut ChaCha8Rng) -> &'p Chromosome {
    let total: f64 = pop.iter().map(|c| c.fitness.unwrap_or(0.0).max(0.0)).sum();
    if total <= 0.0 {
        return &pop[rng.gen_range(0..pop.len())];
    }
    let mut r = rng.gen::<f64>() * total;
    for c in pop {
        r -= c.fitness.unwrap_or(0.0).max(0.0);
        if r < 0.0 {
            return c;
        }
    }
    &pop[pop.len() - 1]
}

fn stats(generation: usize, pop: &[Chromosome], space: &SearchSpace) -> GenerationStats {
    let best = pop.iter().min_by(|a, b| rank_cmp(a, b)).expect("population is non-empty");
    GenerationStats {
        generation,
        best_fitness: best.fitness.unwrap_or(0.0),
        mean_fitness: pop.iter().map(|c| c.fitness.unwrap_or(0.0)).sum::<f64>() / pop.len() as f64,
        population: pop.len(),
        smallest: pop.iter().map(Chromosome::size).min().unwrap_or(0),
        best_features: space.to_subset(&best.genes).indices(),
    }
}

/// Generational GA: roulette selection, single-point crossover, bit-flip
/// mutation, elitism. All random draws happen on this thread in a fixed
/// order; only fitness evaluation is parallel.
pub fn ga_search(
    d: &Dataset,
    space: &SearchSpace,
    params: &GaParams,
) -> Result<(FeatureSubset, SearchTrace)> {
    params.validate()?;
    if space.is_empty() {
        return Err(SearchError::NoCandidates);
    }
    let fitness = WrapperFitness::new(d, params.fitness_folds, params.seed)?;
    ga_search_with(&fitness, space, params)
}

/// As [`ga_search`], reusing an existing fitness cache.
pub fn ga_search_with(
    fitness: &WrapperFitness,
    space: &SearchSpace,
    params: &GaParams,
) -> Result<(FeatureSubset, SearchTrace)> {
    params.validate()?;
    let n = space.len();
    let mut rng = stream(params.seed, 2);
    let mut pop = seed_population(space, params);
    evaluate_population(&mut pop, space, fitness)?;

    let mut best = pop.iter().min_by(|a, b| rank_cmp(a, b)).cloned().expect("non-empty");
    let mut generations = vec![stats(0, &pop, space)];

    for g in 1..=params.max_generations {
        let mut ranked = pop.clone();
        ranked.sort_by(rank_cmp);
        let mut next: Vec<Chromosome> = ranked[..params.elitism].to_vec();
        while next.len() < params.population_size {
            let a = roulette(&pop, &mut rng).genes.clone();
            let b = roulette(&pop, &mut rng).genes.clone();
            let (mut c1, mut c2) = if n >= 2 && rng.gen_bool(params.crossover_prob) {
                let point = rng.gen_range(1..n);
                let mut c1 = a[..point].to_vec();
                c1.extend_from_slice(&b[point..]);
                let mut c2 = b[..point].to_vec();
                c2.extend_from_slice(&a[point..]);
                (c1, c2)
            } else {
                (a, b)
            };
            for child in [&mut c1, &mut c2] {
                for gene in child.iter_mut() {
                    if rng.gen_bool(params.mutation_prob) {
                        *gene = !*gene;
                    }
                }
                repair(child, &mut rng);
            }
            next.push(Chromosome::new(c1));
            if next.len() < params.population_size {
                next.push(Chromosome::new(c2));
            }
        }
        evaluate_population(&mut next, space, fitness)?;
        pop = next;
        let gen_best = pop.iter().min_by(|a, b| rank_cmp(a, b)).expect("non-empty");
        if rank_cmp(gen_best, &best) == Ordering::Less {
            best = gen_best.clone();
        }
        generations.push(stats(g, &pop, space));
    }

    let subset = space.to_subset(&best.genes);
    let trace = SearchTrace {
        candidates: space.candidates().to_vec(),
        generations,
        evaluations: fitness.evaluations(),
        best_fitness: best.fitness.unwrap_or(0.0),
    };
    Ok((subset, trace))
}
