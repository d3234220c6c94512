//! Adversarial regimes: the constrained GAN (critic sees feasible solutions),
//! the penalized generator (critic sees tile-probability maps, plus a
//! weighted path-cost term), and the postprocess baseline (critic sees raw
//! scores; projection only at generation time).

use serde::{Deserialize, Serialize};

use super::config::{AdversaryMode, GanTrainConfig, IndividualLoss};
use super::objective::path_objective;
use crate::diffsolver::{layer_backward, layer_forward, Problem, SolveRecord, SolverLayerConfig};
use crate::error::{Error, Result};
use crate::nn::{Activation, Binding, DenseNet, Graph, NodeId, OptimState, Parameterized, Tensor};
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::solve::{check_feasible, cost_table, project_level, Level, LevelSpec, NUM_CLASSES};

/// How raw generator outputs are turned into its latent design.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Head {
    /// Unbounded scores, fed straight to a solver.
    Scores,
    /// Softmax over the classes of every cell.
    CellSoftmax,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Generator<T: Scalar> {
    pub net: DenseNet<T>,
    pub head: Head,
}

impl<T: Scalar> Generator<T> {
    pub fn new(noise_dim: usize, hidden: &[usize], out_dim: usize, head: Head, rng: &mut RngStream) -> Result<Self> {
        let mut dims = vec![noise_dim];
        dims.extend_from_slice(hidden);
        dims.push(out_dim);
        let net = DenseNet::new(&dims, Activation::Relu, Activation::Identity, rng)?;
        Ok(Self { net, head })
    }

    pub fn noise_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.net.output_dim()
    }

    pub fn sample_noise(&self, rng: &mut RngStream, n: usize) -> Tensor<T> {
        let d = self.noise_dim();
        Tensor::new(vec![n, d], rng.normal_vec(n * d)).expect("shape matches data")
    }

    pub fn forward(&self, g: &mut Graph<T>, noise: NodeId) -> Result<(NodeId, Binding)> {
        let (raw, binding) = self.net.forward(g, noise)?;
        let out = match self.head {
            Head::Scores => raw,
            Head::CellSoftmax => g.group_softmax(raw, NUM_CLASSES)?,
        };
        Ok((out, binding))
    }

    /// Graph-free latent designs for a noise batch.
    pub fn latent(&self, noise: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = Graph::new();
        let z = g.constant(noise.clone());
        let (out, _) = self.forward(&mut g, z)?;
        Ok(g.value(out).detached())
    }
}

impl<T: Scalar> Parameterized<T> for Generator<T> {
    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.net.params_mut()
    }
}

/// Generator, critic and their optimizers.
#[derive(Clone, Debug)]
pub struct GanState<T: Scalar> {
    pub generator: Generator<T>,
    pub critic: DenseNet<T>,
    pub gen_opt: OptimState<T>,
    pub critic_opt: OptimState<T>,
}

impl<T: Scalar> GanState<T> {
    pub fn new(cfg: &GanTrainConfig, data_dim: usize, head: Head, rng: &mut RngStream) -> Result<Self> {
        cfg.validate()?;
        let generator = Generator::new(cfg.noise_dim, &cfg.gen_hidden, data_dim, head, rng)?;
        let mut dims = vec![data_dim];
        dims.extend_from_slice(&cfg.critic_hidden);
        dims.push(1);
        let mut critic = DenseNet::new(&dims, Activation::Relu, Activation::Identity, rng)?;
        let clip = T::of(cfg.w_clip);
        for p in critic.params_mut() {
            p.data_mut()
                .iter_mut()
                .for_each(|v: &mut T| *v = v.max(-clip).min(clip));
        }
        Ok(Self {
            generator,
            critic,
            gen_opt: OptimState::with_method(cfg.optimizer, T::of(cfg.gen_lr)),
            critic_opt: OptimState::with_method(cfg.optimizer, T::of(cfg.critic_lr)).with_clip(clip),
        })
    }
}

/// Averages over one epoch (or one step).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub group_loss: f64,
    pub individual_loss: f64,
    pub critic_loss: f64,
    /// Solutions that passed the feasibility check, out of `samples`.
    pub feasible: usize,
    pub samples: usize,
}

impl StepStats {
    pub fn feasible_rate(&self) -> f64 {
        if self.samples == 0 {
            1.0
        } else {
            self.feasible as f64 / self.samples as f64
        }
    }

    fn absorb(&mut self, other: &StepStats, n: f64) {
        self.group_loss += other.group_loss / n;
        self.individual_loss += other.individual_loss / n;
        self.critic_loss += other.critic_loss / n;
        self.feasible += other.feasible;
        self.samples += other.samples;
    }
}

/// One Wasserstein critic update: minimises `mean f(fake) − mean f(real)`.
/// Returns the loss before the update.
pub fn critic_step<T: Scalar>(
    critic: &mut DenseNet<T>,
    opt: &mut OptimState<T>,
    real: &Tensor<T>,
    fake: &Tensor<T>,
) -> Result<f64> {
    let mut g = Graph::new();
    let binding = critic.bind(&mut g);
    let r = g.constant(real.clone());
    let f = g.constant(fake.clone());
    let fr = critic.forward_bound(&mut g, &binding, r)?;
    let ff = critic.forward_bound(&mut g, &binding, f)?;
    let mr = g.mean(fr);
    let mf = g.mean(ff);
    let loss = g.sub(mf, mr)?;
    let value = g.value(loss).data()[0].as_f64();
    let grads = g.backward(loss)?;
    critic.accumulate_grads(&binding, &grads)?;
    opt.step(critic)?;
    if let Some(clip) = opt.w_clip {
        if critic.params().any(|p| p.data().iter().any(|v| v.abs() > clip)) {
            return Err(Error::Contract("critic weight escaped its clip bound".into()));
        }
    }
    Ok(value)
}

/// Mean critic score of the rows of `xs` and its gradient with respect to `xs`.
pub fn critic_input_grad<T: Scalar>(critic: &DenseNet<T>, xs: &Tensor<T>) -> Result<(T, Vec<T>)> {
    let mut g = Graph::new();
    let x = g.variable(xs.clone());
    let binding = critic.bind(&mut g);
    let out = critic.forward_bound(&mut g, &binding, x)?;
    let m = g.mean(out);
    let grads = g.backward(m)?;
    Ok((g.value(m).data()[0], grads.get_or_zero(x, xs.len())))
}

/// Solves every row of `c`; each level solution is checked for feasibility.
pub fn solve_rows<T: Scalar>(c: &Tensor<T>, problem: &Problem) -> Result<Vec<SolveRecord<T>>> {
    let dim = problem.dim();
    if !c.len().is_multiple_of(dim) {
        return Err(Error::Dimension(format!(
            "batch of {} entries is not a multiple of {dim}",
            c.len()
        )));
    }
    c.data()
        .chunks(dim)
        .map(|row| {
            let (x, rec) = layer_forward(row, problem)?;
            if let Problem::Level(spec) = problem {
                if !check_feasible(&x, spec)? {
                    return Err(Error::Contract("solver returned an infeasible level".into()));
                }
            }
            Ok(rec)
        })
        .collect()
}

fn stack<T: Scalar>(rows: impl Iterator<Item = Vec<T>>, width: usize) -> Tensor<T> {
    let data: Vec<T> = rows.flatten().collect();
    let n = data.len() / width.max(1);
    Tensor::new(vec![n, width], data).expect("rows share a width")
}

/// Per-sample loss on a solution: value and gradient with respect to it.
pub type IndividualFn<'a, T> = &'a dyn Fn(&[T]) -> Result<(T, Vec<T>)>;
/// Population loss on stacked solutions: value and gradient.
pub type GroupFn<'a, T> = &'a dyn Fn(&Tensor<T>) -> Result<(T, Vec<T>)>;

/// One generator update through the solver layer on
/// `group(X) + γ · mean_j individual(x_j)`, where `x_j = solve(G(ε_j))`.
#[allow(clippy::too_many_arguments)]
pub fn genco_step<T: Scalar>(
    generator: &mut Generator<T>,
    opt: &mut OptimState<T>,
    problem: &Problem,
    layer: &SolverLayerConfig,
    noise: &Tensor<T>,
    group: GroupFn<'_, T>,
    individual: Option<IndividualFn<'_, T>>,
    gamma: f64,
) -> Result<StepStats> {
    let mut g = Graph::new();
    let z = g.constant(noise.clone());
    let (c, binding) = generator.forward(&mut g, z)?;
    let records = solve_rows(g.value(c), problem)?;
    let b = records.len();
    let xs = stack(records.iter().map(|r| r.solution.clone()), problem.dim());
    let (group_value, mut g_x) = group(&xs)?;
    if g_x.len() != xs.len() {
        return Err(Error::Dimension("group loss gradient shape".into()));
    }
    let mut ind_total = 0.0;
    if let Some(f) = individual {
        let scale = T::of(gamma / b as f64);
        for (j, rec) in records.iter().enumerate() {
            let (v, gi) = f(&rec.solution)?;
            ind_total += v.as_f64();
            if gamma > 0.0 {
                let dim = problem.dim();
                for (dst, src) in g_x[j * dim..(j + 1) * dim].iter_mut().zip(&gi) {
                    *dst += scale * *src;
                }
            }
        }
    }
    let dim = problem.dim();
    let mut g_c = Vec::with_capacity(xs.len());
    for (j, rec) in records.iter().enumerate() {
        g_c.extend(layer_backward(rec, &g_x[j * dim..(j + 1) * dim], layer)?);
    }
    let surrogate = g.dot_const(c, g_c)?;
    let grads = g.backward(surrogate)?;
    generator.net.accumulate_grads(&binding, &grads)?;
    opt.step(generator)?;
    Ok(StepStats {
        group_loss: group_value.as_f64(),
        individual_loss: ind_total / b as f64,
        critic_loss: 0.0,
        feasible: b,
        samples: b,
    })
}

fn check_levels(data: &[Level], spec: &LevelSpec) -> Result<()> {
    if data.is_empty() {
        return Err(Error::DataValidation("training set is empty".into()));
    }
    for (i, l) in data.iter().enumerate() {
        if l.height() != spec.height || l.width() != spec.width || !l.satisfies(spec) {
            return Err(Error::DataValidation(format!("training level {i} is not feasible")));
        }
    }
    Ok(())
}

fn real_batch<T: Scalar>(data: &[Vec<T>], width: usize, n: usize, rng: &mut RngStream) -> Tensor<T> {
    stack((0..n).map(|_| data[rng.below(data.len())].clone()), width)
}

fn steps_per_epoch(n: usize, batch: usize) -> usize {
    n.div_ceil(batch).max(1)
}

/// Fake batch as the critic of the given regime sees it.
fn fakes<T: Scalar>(gen: &Generator<T>, problem: Option<&Problem>, n: usize, rng: &mut RngStream) -> Result<Tensor<T>> {
    let c = gen.latent(&gen.sample_noise(rng, n))?;
    match problem {
        None => Ok(c),
        Some(p) => {
            let recs = solve_rows(&c, p)?;
            Ok(stack(recs.into_iter().map(|r| r.solution), p.dim()))
        }
    }
}

fn critic_phase<T: Scalar>(
    state: &mut GanState<T>,
    cfg: &GanTrainConfig,
    real: &[Vec<T>],
    problem: Option<&Problem>,
    rng: &mut RngStream,
) -> Result<f64> {
    if cfg.adversary_mode == AdversaryMode::Fixed {
        return Ok(0.0);
    }
    let width = state.generator.out_dim();
    let mut total = 0.0;
    for _ in 0..cfg.critic_steps {
        let r = real_batch(real, width, cfg.batch_size, rng);
        let f = fakes(&state.generator, problem, cfg.batch_size, rng)?;
        total += critic_step(&mut state.critic, &mut state.critic_opt, &r, &f)?;
    }
    Ok(total / cfg.critic_steps as f64)
}

/// Shortest-path cost of a level's cost map, with its gradient.
fn level_path_loss<'a, T: Scalar>(
    spec: &'a LevelSpec,
    table: &'a [f64; NUM_CLASSES],
) -> impl Fn(&[T]) -> Result<(T, Vec<T>)> + 'a {
    move |x: &[T]| path_objective(x, spec.height, spec.width, table)
}

/// One pass of the constrained GAN: the critic only ever sees feasible
/// solutions, and the generator learns through the solver layer.
pub fn constrained_gan_epoch<T: Scalar>(
    state: &mut GanState<T>,
    data: &[Level],
    spec: &LevelSpec,
    cfg: &GanTrainConfig,
    rng: &mut RngStream,
) -> Result<StepStats> {
    check_levels(data, spec)?;
    let real: Vec<Vec<T>> = data.iter().map(Level::to_one_hot).collect();
    let problem = Problem::Level(spec.clone());
    let steps = steps_per_epoch(data.len(), cfg.batch_size);
    let path_loss = level_path_loss::<T>(spec, &cfg.cost_table);
    let mut stats = StepStats::default();
    for _ in 0..steps {
        let critic_loss = critic_phase(state, cfg, &real, Some(&problem), rng)?;
        let critic = state.critic.clone();
        let group = move |xs: &Tensor<T>| -> Result<(T, Vec<T>)> {
            let (m, grad) = critic_input_grad(&critic, xs)?;
            Ok((-m, grad.into_iter().map(|v| -v).collect()))
        };
        let noise = state.generator.sample_noise(rng, cfg.batch_size);
        let ind: Option<IndividualFn<'_, T>> = Some(&path_loss);
        let mut s = genco_step(
            &mut state.generator,
            &mut state.gen_opt,
            &problem,
            &cfg.solver,
            &noise,
            &group,
            ind,
            cfg.gamma,
        )?;
        s.critic_loss = critic_loss;
        stats.absorb(&s, steps as f64);
    }
    Ok(stats)
}

/// One pass of the postprocess baseline: an ordinary WGAN on raw scores;
/// no solver is involved in training.
pub fn postprocess_baseline_epoch<T: Scalar>(
    state: &mut GanState<T>,
    data: &[Level],
    spec: &LevelSpec,
    cfg: &GanTrainConfig,
    rng: &mut RngStream,
) -> Result<StepStats> {
    check_levels(data, spec)?;
    let real: Vec<Vec<T>> = data.iter().map(Level::to_one_hot).collect();
    let steps = steps_per_epoch(data.len(), cfg.batch_size);
    let mut stats = StepStats::default();
    for _ in 0..steps {
        let critic_loss = critic_phase(state, cfg, &real, None, rng)?;
        let noise = state.generator.sample_noise(rng, cfg.batch_size);
        let mut g = Graph::new();
        let z = g.constant(noise);
        let (c, binding) = state.generator.forward(&mut g, z)?;
        let cb = state.critic.bind(&mut g);
        let f = state.critic.forward_bound(&mut g, &cb, c)?;
        let m = g.mean(f);
        let loss = g.scale(m, -T::one());
        let grads = g.backward(loss)?;
        state.generator.net.accumulate_grads(&binding, &grads)?;
        state.gen_opt.step(&mut state.generator)?;
        let s = StepStats {
            group_loss: g.value(loss).data()[0].as_f64(),
            critic_loss,
            ..StepStats::default()
        };
        stats.absorb(&s, steps as f64);
    }
    Ok(stats)
}

fn check_maps<T: Scalar>(data: &[Vec<T>], dim: usize) -> Result<()> {
    if data.is_empty() {
        return Err(Error::DataValidation("training set is empty".into()));
    }
    let tol = T::of(1e-9);
    for (i, m) in data.iter().enumerate() {
        let ok = m.len() == dim
            && m.chunks(NUM_CLASSES).all(|cell| {
                cell.iter().all(|p| *p >= T::zero() && *p <= T::one())
                    && (cell.iter().copied().sum::<T>() - T::one()).abs() <= tol
            });
        if !ok {
            return Err(Error::DataValidation(format!(
                "terrain map {i} is not a tile distribution"
            )));
        }
    }
    Ok(())
}

/// One pass of penalized training on tile-probability maps. The generator
/// loss is `−mean f(p) + γ · mean individual(p)`; with the shortest-path
/// term the individual loss is `wᵀx*` for `w = cost_map(p)` and the optimal
/// path `x*`, whose gradient with respect to `w` is `x*`.
pub fn penalized_gan_epoch<T: Scalar>(
    state: &mut GanState<T>,
    data: &[Vec<T>],
    height: usize,
    width: usize,
    cfg: &GanTrainConfig,
    rng: &mut RngStream,
) -> Result<StepStats> {
    let dim = height * width * NUM_CLASSES;
    check_maps(data, dim)?;
    if state.generator.head != Head::CellSoftmax || state.generator.out_dim() != dim {
        return Err(Error::Contract(
            "penalized training needs a cell-softmax generator of map shape".into(),
        ));
    }
    let problem = Problem::Path { height, width };
    let steps = steps_per_epoch(data.len(), cfg.batch_size);
    let mut stats = StepStats::default();
    for _ in 0..steps {
        let critic_loss = critic_phase(state, cfg, data, None, rng)?;
        let noise = state.generator.sample_noise(rng, cfg.batch_size);
        let mut g = Graph::new();
        let z = g.constant(noise);
        let (p, binding) = state.generator.forward(&mut g, z)?;
        let cb = state.critic.bind(&mut g);
        let f = state.critic.forward_bound(&mut g, &cb, p)?;
        let m = g.mean(f);
        let adv = g.scale(m, -T::one());
        let w = g.group_dot(p, cost_table(&cfg.cost_table))?;
        let recs = solve_rows(g.value(w), &problem)?;
        let b = recs.len();
        let path_cost: f64 = recs
            .iter()
            .map(|r| {
                r.input
                    .iter()
                    .zip(&r.solution)
                    .map(|(a, x)| (*a * *x).as_f64())
                    .sum::<f64>()
            })
            .sum::<f64>()
            / b as f64;
        let ind = match cfg.individual {
            IndividualLoss::ShortestPath => {
                let inv = T::of(1.0 / b as f64);
                let weights: Vec<T> = recs.iter().flat_map(|r| r.solution.iter().map(|x| *x * inv)).collect();
                g.dot_const(w, weights)?
            }
            IndividualLoss::Semantic => g.mean(w),
        };
        let individual_value = g.value(ind).data()[0].as_f64();
        let loss = if cfg.gamma > 0.0 {
            let s = g.scale(ind, T::of(cfg.gamma));
            g.add(adv, s)?
        } else {
            adv
        };
        let grads = g.backward(loss)?;
        state.generator.net.accumulate_grads(&binding, &grads)?;
        state.gen_opt.step(&mut state.generator)?;
        let s = StepStats {
            group_loss: g.value(adv).data()[0].as_f64(),
            individual_loss: if cfg.individual == IndividualLoss::ShortestPath {
                path_cost
            } else {
                individual_value
            },
            critic_loss,
            feasible: b,
            samples: b,
        };
        stats.absorb(&s, steps as f64);
    }
    Ok(stats)
}

/// Draws `n` levels from a score generator; every one is checked feasible.
pub fn generate_levels<T: Scalar>(
    gen: &Generator<T>,
    spec: &LevelSpec,
    n: usize,
    rng: &mut RngStream,
) -> Result<Vec<Level>> {
    if n == 0 {
        return Err(Error::Parameter("sample count must be at least 1".into()));
    }
    let c = gen.latent(&gen.sample_noise(rng, n))?;
    c.data()
        .chunks(spec.dim())
        .map(|row| {
            let l = project_level(row, spec)?;
            if !l.satisfies(spec) {
                return Err(Error::Contract("generated level is infeasible".into()));
            }
            Ok(l)
        })
        .collect()
}

/// Draws `n` tile-probability maps from a cell-softmax generator.
pub fn generate_maps<T: Scalar>(gen: &Generator<T>, n: usize, rng: &mut RngStream) -> Result<Vec<Vec<T>>> {
    if n == 0 {
        return Err(Error::Parameter("sample count must be at least 1".into()));
    }
    let p = gen.latent(&gen.sample_noise(rng, n))?;
    Ok(p.data().chunks(gen.out_dim()).map(<[T]>::to_vec).collect())
}
