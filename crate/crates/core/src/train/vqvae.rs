//! Vector-quantised autoencoder whose decoder output is projected onto
//! playable levels before any loss sees it.

use serde::{Deserialize, Serialize};

use super::config::VqvaeTrainConfig;
use super::gan::solve_rows;
use super::objective::path_objective;
use crate::diffsolver::{layer_backward, Problem};
use crate::error::{Error, Result};
use crate::nn::{Activation, DenseNet, Graph, OptimState, Parameterized, Tensor};
use crate::rng::RngStream;
use crate::scalar::Scalar;
use crate::solve::{project_level, Level, LevelSpec, NUM_CLASSES};

/// `K` embedding vectors stored as the rows of a `[K, d]` tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Codebook<T: Scalar> {
    pub embeddings: Tensor<T>,
}

impl<T: Scalar> Codebook<T> {
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Parameter("codebook is empty".into()));
        }
        let embeddings = Tensor::from_rows(rows)?;
        if !embeddings.all_finite() {
            return Err(Error::Domain("codebook vectors must be finite".into()));
        }
        Ok(Self { embeddings })
    }

    pub fn len(&self) -> usize {
        self.embeddings.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.embeddings.shape()[1]
    }

    pub fn row(&self, k: usize) -> &[T] {
        self.embeddings.row_slice(k)
    }

    /// Index of the closest vector in squared distance; the lowest index
    /// wins ties.
    pub fn nearest(&self, z: &[T]) -> usize {
        let mut best = (0, T::infinity());
        for k in 0..self.len() {
            let d: T = self.row(k).iter().zip(z).map(|(e, v)| (*e - *v) * (*e - *v)).sum();
            if d < best.1 {
                best = (k, d);
            }
        }
        best.0
    }
}

impl<T: Scalar> Parameterized<T> for Codebook<T> {
    fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        vec![&mut self.embeddings]
    }
}

/// Convolution-style autoencoder on dense layers. The encoder maps each
/// cell's square neighbourhood of one-hot tiles (zero-padded at the border)
/// to a latent vector, which is quantised against the codebook; the decoder
/// maps each cell's neighbourhood of quantised vectors to that cell's class
/// scores.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Vqvae<T: Scalar> {
    pub encoder: DenseNet<T>,
    pub decoder: DenseNet<T>,
    pub codebook: Codebook<T>,
    pub patch_radius: usize,
}

/// For every cell of a `height × width` grid, row-major, the row-major
/// indices of its neighbours within `radius`; `None` outside the grid.
pub fn neighbourhoods(height: usize, width: usize, radius: usize) -> Vec<Option<usize>> {
    let (h, w, r) = (height as isize, width as isize, radius as isize);
    let mut out = Vec::with_capacity(height * width * (2 * radius + 1).pow(2));
    for row in 0..h {
        for col in 0..w {
            for dr in -r..=r {
                for dc in -r..=r {
                    let (y, x) = (row + dr, col + dc);
                    out.push(((0..h).contains(&y) && (0..w).contains(&x)).then(|| (y * w + x) as usize));
                }
            }
        }
    }
    out
}

/// Gathers `width`-sized rows of `rows` (one per cell) into per-cell
/// neighbourhood rows, for a batch of `batch` grids.
fn gather_patches<T: Scalar>(rows: &[T], width: usize, batch: usize, nb: &[Option<usize>], cells: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(batch * nb.len() * width);
    for j in 0..batch {
        for n in nb {
            match n {
                Some(i) => {
                    let at = (j * cells + i) * width;
                    out.extend_from_slice(&rows[at..at + width]);
                }
                None => out.extend(std::iter::repeat_n(T::zero(), width)),
            }
        }
    }
    out
}

fn patch_len(radius: usize) -> usize {
    (2 * radius + 1).pow(2)
}

impl<T: Scalar> Vqvae<T> {
    /// Fresh networks; the codebook starts at cell encodings of randomly
    /// chosen training levels so that no code begins unused.
    pub fn new(cfg: &VqvaeTrainConfig, data: &[Level], rng: &mut RngStream) -> Result<Self> {
        cfg.validate()?;
        if data.is_empty() {
            return Err(Error::DataValidation("training set is empty".into()));
        }
        let d = cfg.embed_dim;
        let p = patch_len(cfg.patch_radius);
        let mut dims = vec![p * NUM_CLASSES];
        dims.extend_from_slice(&cfg.enc_hidden);
        dims.push(d);
        let encoder = DenseNet::new(&dims, Activation::Relu, Activation::Identity, rng)?;
        let mut dims = vec![p * d];
        dims.extend_from_slice(&cfg.dec_hidden);
        dims.push(NUM_CLASSES);
        let decoder = DenseNet::new(&dims, Activation::Relu, Activation::Identity, rng)?;
        let mut model = Self {
            encoder,
            decoder,
            codebook: Codebook::from_rows(&vec![vec![T::zero(); d]; cfg.codebook_size])?,
            patch_radius: cfg.patch_radius,
        };
        for k in 0..cfg.codebook_size {
            model.reseed_code(k, data, rng)?;
        }
        Ok(model)
    }

    /// Moves code `k` onto a random cell encoding of a random level, plus
    /// a little noise.
    fn reseed_code(&mut self, k: usize, data: &[Level], rng: &mut RngStream) -> Result<()> {
        let z = self.encode(&data[rng.below(data.len())])?;
        let d = self.codebook.dim();
        let cell = rng.below(z.len() / d);
        let row = self.codebook.embeddings.row_slice_mut(k);
        for (e, v) in row.iter_mut().zip(&z[cell * d..(cell + 1) * d]) {
            *e = *v + T::of(0.01) * rng.normal::<T>();
        }
        Ok(())
    }

    fn encoder_input(&self, levels: &[Level]) -> Result<Tensor<T>> {
        let (h, w) = (levels[0].height(), levels[0].width());
        let nb = neighbourhoods(h, w, self.patch_radius);
        let x: Vec<T> = levels.iter().flat_map(|l| l.to_one_hot::<T>()).collect();
        let p = patch_len(self.patch_radius);
        let data = gather_patches(&x, NUM_CLASSES, levels.len(), &nb, h * w);
        Tensor::new(vec![levels.len() * h * w, p * NUM_CLASSES], data)
    }

    /// Cell encodings, row-major, `d` values per cell.
    pub fn encode(&self, level: &Level) -> Result<Vec<T>> {
        Ok(self
            .encoder
            .predict(&self.encoder_input(std::slice::from_ref(level))?)?
            .into_data())
    }

    /// Code index chosen for each cell.
    pub fn codes(&self, level: &Level) -> Result<Vec<usize>> {
        let z = self.encode(level)?;
        Ok(z.chunks(self.codebook.dim())
            .map(|s| self.codebook.nearest(s))
            .collect())
    }

    /// Encode, quantise, decode and project.
    pub fn reconstruct(&self, level: &Level, spec: &LevelSpec) -> Result<Level> {
        self.decode_codes(&self.codes(level)?, spec)
    }

    /// Class scores for a grid of code indices.
    pub fn decode_scores(&self, codes: &[usize], spec: &LevelSpec) -> Result<Vec<T>> {
        if codes.len() != spec.cells() || codes.iter().any(|k| *k >= self.codebook.len()) {
            return Err(Error::Parameter(format!(
                "need {} code indices below {}",
                spec.cells(),
                self.codebook.len()
            )));
        }
        let d = self.codebook.dim();
        let zq: Vec<T> = codes
            .iter()
            .flat_map(|k| self.codebook.row(*k).iter().copied())
            .collect();
        let nb = neighbourhoods(spec.height, spec.width, self.patch_radius);
        let p = patch_len(self.patch_radius);
        let input = Tensor::new(vec![spec.cells(), p * d], gather_patches(&zq, d, 1, &nb, spec.cells()))?;
        Ok(self.decoder.predict(&input)?.into_data())
    }

    pub fn decode_codes(&self, codes: &[usize], spec: &LevelSpec) -> Result<Level> {
        project_level(&self.decode_scores(codes, spec)?, spec)
    }

    /// Mean `‖x̃ − x‖²` over `levels`.
    pub fn recon_loss(&self, levels: &[Level], spec: &LevelSpec) -> Result<f64> {
        if levels.is_empty() {
            return Err(Error::Parameter("no levels to reconstruct".into()));
        }
        let mut total = 0.0;
        for l in levels {
            let r = self.reconstruct(l, spec)?;
            total += l.tiles().iter().zip(r.tiles()).filter(|(a, b)| a != b).count() as f64 * 2.0;
        }
        Ok(total / levels.len() as f64)
    }

    /// Decodes codes drawn uniformly and independently for every cell.
    pub fn sample(&self, spec: &LevelSpec, n: usize, rng: &mut RngStream) -> Result<Vec<Level>> {
        if n == 0 {
            return Err(Error::Parameter("sample count must be at least 1".into()));
        }
        (0..n)
            .map(|_| {
                let codes: Vec<usize> = (0..spec.cells()).map(|_| rng.below(self.codebook.len())).collect();
                self.decode_codes(&codes, spec)
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct VqvaeState<T: Scalar> {
    pub model: Vqvae<T>,
    pub enc_opt: OptimState<T>,
    pub dec_opt: OptimState<T>,
    pub code_opt: OptimState<T>,
}

impl<T: Scalar> VqvaeState<T> {
    pub fn new(cfg: &VqvaeTrainConfig, spec: &LevelSpec, data: &[Level], rng: &mut RngStream) -> Result<Self> {
        if let Some(i) = data.iter().position(|l| !l.satisfies(spec)) {
            return Err(Error::DataValidation(format!("training level {i} is not feasible")));
        }
        let lr = T::of(cfg.lr);
        Ok(Self {
            model: Vqvae::new(cfg, data, rng)?,
            enc_opt: OptimState::with_method(cfg.optimizer, lr),
            dec_opt: OptimState::with_method(cfg.optimizer, lr),
            code_opt: OptimState::with_method(cfg.optimizer, lr),
        })
    }
}

/// Batch means of the loss terms of one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VqvaeStats {
    pub recon: f64,
    pub quant: f64,
    pub objective: f64,
    /// Distinct codes selected during an epoch.
    pub codes_used: usize,
    pub feasible: usize,
    pub samples: usize,
}

/// One update on a batch of levels.
pub fn vqvae_step<T: Scalar>(
    state: &mut VqvaeState<T>,
    batch: &[Level],
    spec: &LevelSpec,
    cfg: &VqvaeTrainConfig,
) -> Result<VqvaeStats> {
    if batch.is_empty() {
        return Err(Error::Parameter("empty batch".into()));
    }
    if let Some(i) = batch.iter().position(|l| !l.satisfies(spec)) {
        return Err(Error::DataValidation(format!("batch level {i} is not feasible")));
    }
    let model = &mut state.model;
    let b = batch.len();
    let dim = spec.dim();
    let xs: Vec<Vec<T>> = batch.iter().map(Level::to_one_hot).collect();
    let cells = spec.cells();
    let p = patch_len(model.patch_radius);
    let mut g = Graph::new();
    let x = g.constant(model.encoder_input(batch)?);
    let (ze, enc_b) = model.encoder.forward(&mut g, x)?;
    let d = model.codebook.dim();
    let ks: Vec<usize> = g
        .value(ze)
        .data()
        .chunks(d)
        .map(|z| model.codebook.nearest(z))
        .collect();
    let e = g.variable(model.codebook.embeddings.clone());
    let ek = g.gather_rows(e, ks)?;
    let zq = g.straight_through(ze, g.value(ek).clone())?;
    let nb = neighbourhoods(spec.height, spec.width, model.patch_radius);
    let rows: Vec<Option<usize>> = (0..b)
        .flat_map(|j| nb.iter().map(move |n| n.map(|i| j * cells + i)))
        .collect();
    let zp = g.gather_rows_or_zero(zq, rows)?;
    let zp = g.reshape(zp, vec![b * cells, p * d])?;
    let dec_b = model.decoder.bind(&mut g);
    let c = model.decoder.forward_bound(&mut g, &dec_b, zp)?;
    let c = g.reshape(c, vec![b, dim])?;

    let problem = Problem::Level(spec.clone());
    let records = solve_rows(g.value(c), &problem)?;
    let inv_b = T::of(1.0 / b as f64);
    let mut g_c = Vec::with_capacity(b * dim);
    let (mut recon, mut objective) = (0.0, 0.0);
    for (rec, xj) in records.iter().zip(&xs) {
        let xt = &rec.solution;
        let mut g_x = vec![T::zero(); dim];
        let r: T = xt.iter().zip(xj).map(|(a, b)| (*a - *b) * (*a - *b)).sum();
        recon += r.as_f64();
        if cfg.use_recon {
            for i in 0..dim {
                g_x[i] += T::of(2.0) * (xt[i] - xj[i]);
            }
        }
        let (v, grad) = path_objective(xt, spec.height, spec.width, &cfg.cost_table)?;
        objective += v.as_f64();
        if cfg.use_objective {
            let w = T::of(cfg.beta2);
            for i in 0..dim {
                g_x[i] += w * grad[i];
            }
        }
        g_c.extend(layer_backward(rec, &g_x, &cfg.solver)?.into_iter().map(|v| v * inv_b));
    }
    let surrogate = g.dot_const(c, g_c)?;

    // Codebook term pulls the chosen codes to the (frozen) encodings;
    // commitment pulls the encodings to the (frozen) codes.
    let ze_sg = g.detach(ze);
    let q_code = g.squared_distance(ze_sg, ek)?;
    let ek_sg = g.detach(ek);
    let q_commit = g.squared_distance(ze, ek_sg)?;
    let q_commit = g.scale(q_commit, T::of(cfg.gamma_commit));
    let quant = g.add(q_code, q_commit)?;
    let quant_w = g.scale(quant, T::of(cfg.beta1 / b as f64));
    let total = g.add(surrogate, quant_w)?;

    let grads = g.backward(total)?;
    model.encoder.accumulate_grads(&enc_b, &grads)?;
    model.decoder.accumulate_grads(&dec_b, &grads)?;
    let ge = grads.get_or_zero(e, model.codebook.embeddings.len());
    model.codebook.embeddings.accumulate_grad(&ge)?;
    state.enc_opt.step(&mut model.encoder)?;
    state.dec_opt.step(&mut model.decoder)?;
    state.code_opt.step(&mut model.codebook)?;

    Ok(VqvaeStats {
        recon: recon / b as f64,
        quant: g.value(quant).data()[0].as_f64() / b as f64,
        objective: objective / b as f64,
        codes_used: 0,
        feasible: b,
        samples: b,
    })
}

/// One shuffled pass over `data`. With `reset_dead_codes`, codes that no
/// slot selected during the pass are moved onto random slot encodings of
/// training levels afterwards.
pub fn vqvae_epoch<T: Scalar>(
    state: &mut VqvaeState<T>,
    data: &[Level],
    spec: &LevelSpec,
    cfg: &VqvaeTrainConfig,
    rng: &mut RngStream,
) -> Result<VqvaeStats> {
    if data.is_empty() {
        return Err(Error::DataValidation("training set is empty".into()));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    rng.shuffle(&mut order);
    let batches: Vec<&[usize]> = order.chunks(cfg.batch_size).collect();
    let n = batches.len() as f64;
    let mut out = VqvaeStats::default();
    let mut used = vec![false; state.model.codebook.len()];
    for idx in batches {
        let batch: Vec<Level> = idx.iter().map(|i| data[*i].clone()).collect();
        for l in &batch {
            for k in state.model.codes(l)? {
                used[k] = true;
            }
        }
        let s = vqvae_step(state, &batch, spec, cfg)?;
        out.recon += s.recon / n;
        out.quant += s.quant / n;
        out.objective += s.objective / n;
        out.feasible += s.feasible;
        out.samples += s.samples;
    }
    if cfg.reset_dead_codes {
        for k in (0..used.len()).filter(|k| !used[*k]) {
            state.model.reseed_code(k, data, rng)?;
        }
    }
    out.codes_used = used.iter().filter(|u| **u).count();
    Ok(out)
}
