//! Network assembly: linear encoder, a stack of RF layers with optional
//! identity skips, a leaky-integrate readout and mean pooling over time.
//! Forward passes record a trace that [`Model::backward`] replays in reverse.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use num_complex::Complex;
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::discretization::{coefficients, coefficients_vjp};
use crate::error::{Error, Result};
use crate::hippo::{hippo_block_basis, init_layer, init_layer_random};
use crate::real::Real;
use crate::rng;
use crate::scan::{leaky_in_place, leaky_reverse_in_place, reverse_scan_in_place, scan_in_place, ScanStrategy};
use crate::spike::{SpikeFunction, SpikeMode, Surrogate};
use crate::ssm::{Discretization, SsmLayerParams};

/// Kind of input the first layer sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputKind {
    /// Real-valued samples; first layer uses ZOH.
    ZohContinuous,
    /// Spike rasters; every layer uses the Dirac scheme.
    DiracEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    #[default]
    Hippo,
    /// Decay `U(2, 3)`, frequency `U(5, 10)`, no eigenbasis.
    Random,
}

/// Initial value of the memorization scale `η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EtaInit {
    Constant { value: f64 },
    /// `log η` uniform between `log min` and `log max`, per state.
    LogUniform { min: f64, max: f64 },
}

impl Default for EtaInit {
    fn default() -> Self {
        EtaInit::Constant { value: 1.0 }
    }
}

fn default_one() -> f64 {
    1.0
}
fn default_tau() -> f64 {
    10.0
}
/// Smallest layer width, capped at 32.
fn default_block_size(layer_sizes: &[usize]) -> usize {
    layer_sizes.iter().copied().min().unwrap_or(1).min(32)
}

fn default_true() -> bool {
    true
}

/// Architecture and initialization of a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub layer_sizes: Vec<usize>,
    /// Eigenbasis block width. 0 in a config file selects the default.
    #[serde(default)]
    pub block_size: usize,
    pub num_classes: usize,
    pub first_layer_mode: InputKind,
    #[serde(default = "default_true")]
    pub skip_connections: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub init: InitScheme,
    #[serde(default)]
    pub eta_init: EtaInit,
    #[serde(default = "default_one")]
    pub threshold: f64,
    #[serde(default)]
    pub surrogate: Surrogate,
    /// Time step between input samples.
    #[serde(default = "default_one")]
    pub dt: f64,
    #[serde(default)]
    pub encoder_bias: bool,
    #[serde(default)]
    pub readout_bias: bool,
    #[serde(default = "default_tau")]
    pub readout_tau_init: f64,
    /// Keep the eigenbasis in the spike function of a ZOH first layer.
    #[serde(default = "default_true")]
    pub fixed_basis: bool,
    #[serde(default)]
    pub scan: ScanStrategy,
}

impl ModelConfig {
    pub fn new(input_dim: usize, layer_sizes: Vec<usize>, num_classes: usize, first_layer_mode: InputKind) -> Self {
        let block_size = default_block_size(&layer_sizes);
        ModelConfig {
            input_dim,
            layer_sizes,
            block_size,
            num_classes,
            first_layer_mode,
            skip_connections: true,
            seed: 0,
            init: InitScheme::Hippo,
            eta_init: EtaInit::default(),
            threshold: 1.0,
            surrogate: Surrogate::default(),
            dt: 1.0,
            encoder_bias: false,
            readout_bias: false,
            readout_tau_init: default_tau(),
            fixed_basis: true,
            scan: ScanStrategy::default(),
        }
    }

    /// Replace a zero `block_size` with the default.
    pub fn resolve_defaults(&mut self) {
        if self.block_size == 0 {
            self.block_size = default_block_size(&self.layer_sizes);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.num_classes == 0 {
            return Err(Error::config("input_dim and num_classes must be positive"));
        }
        if self.layer_sizes.is_empty() {
            return Err(Error::config("layer_sizes must not be empty"));
        }
        if self.block_size == 0 {
            return Err(Error::config("block_size must be positive"));
        }
        for &h in &self.layer_sizes {
            if h == 0 || h % self.block_size != 0 {
                return Err(Error::config(format!(
                    "block size {} does not divide layer size {h}",
                    self.block_size
                )));
            }
        }
        if !(self.dt > 0.0) || !self.threshold.is_finite() || !(self.readout_tau_init > 0.0) {
            return Err(Error::config("dt and readout_tau_init must be positive, threshold finite"));
        }
        match self.eta_init {
            EtaInit::Constant { value } if !(value > 0.0) => Err(Error::config("eta must be positive")),
            EtaInit::LogUniform { min, max } if !(min > 0.0 && max >= min) => {
                Err(Error::config("eta range must satisfy 0 < min <= max"))
            }
            _ => Ok(()),
        }
    }

    /// Width fed into layer `l`.
    pub fn layer_input_dim(&self, l: usize) -> usize {
        if l == 0 {
            self.layer_sizes[0]
        } else {
            self.layer_sizes[l - 1]
        }
    }

    /// Whether the input of layer `l` is added to its spikes before layer `l + 1`.
    pub fn skip_after(&self, l: usize) -> bool {
        self.skip_connections && l + 1 < self.layer_sizes.len() && self.layer_input_dim(l) == self.layer_sizes[l]
    }
}

/// Parameter groups with distinct learning rate and weight decay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamGroup {
    /// Complex connection matrices between RF layers.
    Connections,
    /// Decay, frequency, `η` and readout time constants.
    Neuron,
    Encoder,
    Readout,
}

impl ParamGroup {
    pub const ALL: [ParamGroup; 4] = [ParamGroup::Connections, ParamGroup::Neuron, ParamGroup::Encoder, ParamGroup::Readout];

    pub fn name(self) -> &'static str {
        match self {
            ParamGroup::Connections => "connections",
            ParamGroup::Neuron => "neuron",
            ParamGroup::Encoder => "encoder",
            ParamGroup::Readout => "readout",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    /// `[out, in]`
    pub weight: Array2<T>,
    pub bias: Option<Array1<T>>,
}

/// Leaky integrator `y_k = exp(-1/τ) ⊙ y_{k-1} + W s_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutParams<T> {
    /// `[num_classes, H]`
    pub weight: Array2<T>,
    pub bias: Option<Array1<T>>,
    pub log_tau: Array1<T>,
}

impl<T: Real> ReadoutParams<T> {
    pub fn decay(&self) -> Vec<T> {
        self.log_tau.iter().map(|&lt| (-(-lt).exp()).exp()).collect()
    }
}

/// All parameters of a network. Also used as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub encoder: Linear<T>,
    pub layers: Vec<SsmLayerParams<T>>,
    pub readout: ReadoutParams<T>,
}

/// A learnable tensor: name, group and flat data.
pub type TensorRef<'a, T> = (String, ParamGroup, &'a [T]);
pub type TensorMut<'a, T> = (String, ParamGroup, &'a mut [T]);

fn flat<T, D: ndarray::Dimension>(a: &ndarray::Array<T, D>) -> &[T] {
    a.as_slice().expect("parameters are kept in standard layout")
}

fn flat_mut<T, D: ndarray::Dimension>(a: &mut ndarray::Array<T, D>) -> &mut [T] {
    a.as_slice_mut().expect("parameters are kept in standard layout")
}

impl<T: Real> ModelParams<T> {
    /// Learnable tensors in a fixed order. Thresholds and fixed bases are not listed.
    pub fn tensors(&self) -> Vec<TensorRef<'_, T>> {
        let mut out = vec![("encoder.weight".to_string(), ParamGroup::Encoder, flat(&self.encoder.weight))];
        if let Some(b) = &self.encoder.bias {
            out.push(("encoder.bias".into(), ParamGroup::Encoder, flat(b)));
        }
        for (l, p) in self.layers.iter().enumerate() {
            out.push((format!("layers.{l}.log_neg_real"), ParamGroup::Neuron, flat(&p.log_neg_real)));
            out.push((format!("layers.{l}.freq"), ParamGroup::Neuron, flat(&p.freq)));
            out.push((format!("layers.{l}.log_eta"), ParamGroup::Neuron, flat(&p.log_eta)));
            out.push((format!("layers.{l}.conn_re"), ParamGroup::Connections, flat(&p.conn_re)));
            out.push((format!("layers.{l}.conn_im"), ParamGroup::Connections, flat(&p.conn_im)));
        }
        out.push(("readout.weight".into(), ParamGroup::Readout, flat(&self.readout.weight)));
        if let Some(b) = &self.readout.bias {
            out.push(("readout.bias".into(), ParamGroup::Readout, flat(b)));
        }
        out.push(("readout.log_tau".into(), ParamGroup::Neuron, flat(&self.readout.log_tau)));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<TensorMut<'_, T>> {
        let mut out = vec![("encoder.weight".to_string(), ParamGroup::Encoder, flat_mut(&mut self.encoder.weight))];
        if let Some(b) = &mut self.encoder.bias {
            out.push(("encoder.bias".into(), ParamGroup::Encoder, flat_mut(b)));
        }
        for (l, p) in self.layers.iter_mut().enumerate() {
            out.push((format!("layers.{l}.log_neg_real"), ParamGroup::Neuron, flat_mut(&mut p.log_neg_real)));
            out.push((format!("layers.{l}.freq"), ParamGroup::Neuron, flat_mut(&mut p.freq)));
            out.push((format!("layers.{l}.log_eta"), ParamGroup::Neuron, flat_mut(&mut p.log_eta)));
            out.push((format!("layers.{l}.conn_re"), ParamGroup::Connections, flat_mut(&mut p.conn_re)));
            out.push((format!("layers.{l}.conn_im"), ParamGroup::Connections, flat_mut(&mut p.conn_im)));
        }
        out.push(("readout.weight".into(), ParamGroup::Readout, flat_mut(&mut self.readout.weight)));
        if let Some(b) = &mut self.readout.bias {
            out.push(("readout.bias".into(), ParamGroup::Readout, flat_mut(b)));
        }
        out.push(("readout.log_tau".into(), ParamGroup::Neuron, flat_mut(&mut self.readout.log_tau)));
        out
    }

    /// Same structure, all learnable entries zero, no fixed bases.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for l in &mut z.layers {
            l.fixed_basis = None;
        }
        for (_, _, t) in z.tensors_mut() {
            t.fill(T::zero());
        }
        z
    }

    pub fn add_assign(&mut self, other: &Self) {
        for ((_, _, a), (_, _, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, &y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, c: T) {
        for (_, _, a) in self.tensors_mut() {
            a.iter_mut().for_each(|x| *x *= c);
        }
    }

    pub fn num_learnable(&self) -> usize {
        self.tensors().iter().map(|(_, _, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, _, t)| t.iter().all(|x| x.is_finite()))
    }

    pub fn cast<U: Real>(&self) -> ModelParams<U> {
        let c1 = |a: &Array1<T>| a.mapv(|v| U::of(v.f64()));
        let c2 = |a: &Array2<T>| a.mapv(|v| U::of(v.f64()));
        ModelParams {
            encoder: Linear { weight: c2(&self.encoder.weight), bias: self.encoder.bias.as_ref().map(c1) },
            layers: self.layers.iter().map(SsmLayerParams::cast).collect(),
            readout: ReadoutParams {
                weight: c2(&self.readout.weight),
                bias: self.readout.bias.as_ref().map(c1),
                log_tau: c1(&self.readout.log_tau),
            },
        }
    }
}

/// Intermediate values of one RF layer kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerTrace<T> {
    pub input: Array2<T>,
    pub a_bar: Vec<Complex<T>>,
    pub input_scale: Vec<Complex<T>>,
    /// `B u_k` before discretization scaling.
    pub projected: Array2<Complex<T>>,
    pub states: Array2<Complex<T>>,
    /// Signal compared against the threshold: `Re(x)` or `Re(V x)`.
    pub pre: Array2<T>,
    pub spikes: Array2<T>,
}

impl<T: Real> LayerTrace<T> {
    pub fn spike_count(&self) -> u64 {
        self.spikes.iter().filter(|&&s| s != T::zero()).count() as u64
    }
}

fn complex_from_parts<T: Real>(re: &Array2<T>, im: &Array2<T>) -> Array2<Complex<T>> {
    let mut out = Array2::from_elem(re.raw_dim(), Complex::new(T::zero(), T::zero()));
    ndarray::Zip::from(&mut out).and(re).and(im).for_each(|o, &r, &i| *o = Complex::new(r, i));
    out
}

/// Forward pass of one RF layer on a real input `[L, H_in]`.
pub fn layer_forward<T: Real>(
    p: &SsmLayerParams<T>,
    input: Array2<T>,
    dt: T,
    spike: &SpikeFunction,
    mode: SpikeMode,
    strategy: ScanStrategy,
) -> Result<LayerTrace<T>> {
    if input.ncols() != p.input_dim() {
        return Err(Error::input(format!(
            "layer expects {} input channels, got {}",
            p.input_dim(),
            input.ncols()
        )));
    }
    let input = input.as_standard_layout().into_owned();
    let (a_bar, input_scale) = coefficients(p, dt);
    let projected = complex_from_parts(&input.dot(&p.conn_re.t()), &input.dot(&p.conn_im.t()));
    let mut states = projected.clone();
    for mut row in states.rows_mut() {
        for (x, s) in row.iter_mut().zip(&input_scale) {
            *x *= *s;
        }
    }
    let zero = vec![Complex::new(T::zero(), T::zero()); p.state_dim()];
    scan_in_place(&a_bar, states.as_slice_mut().expect("standard layout"), &zero, strategy);

    let pre = match &p.fixed_basis {
        Some(basis) => {
            let re = states.mapv(|z| z.re);
            let im = states.mapv(|z| z.im);
            basis.real_part_of_product(re.view(), im.view())
        }
        None => states.mapv(|z| z.re),
    };
    let spikes = pre.mapv(|y| spike.forward(y, mode));
    Ok(LayerTrace { input, a_bar, input_scale, projected, states, pre, spikes })
}

/// Backward pass of one RF layer. Accumulates parameter gradients into
/// `grads` and returns the cotangent of the layer input.
pub fn layer_backward<T: Real>(
    p: &SsmLayerParams<T>,
    trace: &LayerTrace<T>,
    d_spikes: &Array2<T>,
    dt: T,
    spike: &SpikeFunction,
    mode: SpikeMode,
    strategy: ScanStrategy,
    grads: &mut SsmLayerParams<T>,
) -> Array2<T> {
    let h = p.state_dim();
    let l = trace.states.nrows();
    let mut d_pre = d_spikes.clone();
    ndarray::Zip::from(&mut d_pre).and(&trace.pre).for_each(|g, &y| *g *= spike.backward(y, mode));

    let mut lam = match &p.fixed_basis {
        Some(basis) => {
            let (gre, gim) = basis.real_part_adjoint(d_pre.view());
            complex_from_parts(&gre, &gim)
        }
        None => d_pre.mapv(|g| Complex::new(g, T::zero())),
    };
    let conj_a: Vec<_> = trace.a_bar.iter().map(|z| z.conj()).collect();
    reverse_scan_in_place(&conj_a, &mut lam, strategy);

    let zero = Complex::new(T::zero(), T::zero());
    let mut grad_a = vec![zero; h];
    let mut grad_scale = vec![zero; h];
    for k in 0..l {
        for i in 0..h {
            let g = lam[[k, i]];
            if k > 0 {
                grad_a[i] += g * trace.states[[k - 1, i]].conj();
            }
            grad_scale[i] += g * trace.projected[[k, i]].conj();
        }
    }
    let mut gv_re = Array2::zeros((l, h));
    let mut gv_im = Array2::zeros((l, h));
    for k in 0..l {
        for i in 0..h {
            let g = trace.input_scale[i].conj() * lam[[k, i]];
            gv_re[[k, i]] = g.re;
            gv_im[[k, i]] = g.im;
        }
    }
    ndarray::linalg::general_mat_mul(T::one(), &gv_re.t(), &trace.input, T::one(), &mut grads.conn_re);
    ndarray::linalg::general_mat_mul(T::one(), &gv_im.t(), &trace.input, T::one(), &mut grads.conn_im);
    let mut d_input = gv_re.dot(&p.conn_re);
    ndarray::linalg::general_mat_mul(T::one(), &gv_im, &p.conn_im, T::one(), &mut d_input);

    let (g_lnr, g_freq, g_le) = coefficients_vjp(p, dt, &grad_a, &grad_scale);
    for i in 0..h {
        grads.log_neg_real[i] += g_lnr[i];
        grads.freq[i] += g_freq[i];
        grads.log_eta[i] += g_le[i];
    }
    d_input
}

/// Per-step linear projection `u_k ↦ W u_k` for `u: [L, C]`, `W: [H, C]`.
pub fn encoder_forward<T: Real>(w: ArrayView2<T>, u: ArrayView2<T>) -> Result<Array2<T>> {
    if w.ncols() != u.ncols() {
        return Err(Error::input(format!("encoder expects {} channels, got {}", w.ncols(), u.ncols())));
    }
    Ok(u.dot(&w.t()))
}

/// Leaky-integrate trace `[L, K]` of the readout driven by `s: [L, H]`.
pub fn readout_forward<T: Real>(params: &ReadoutParams<T>, s: ArrayView2<T>) -> Result<Array2<T>> {
    if s.ncols() != params.weight.ncols() {
        return Err(Error::input(format!(
            "readout expects {} inputs, got {}",
            params.weight.ncols(),
            s.ncols()
        )));
    }
    let mut y = s.dot(&params.weight.t());
    if let Some(b) = &params.bias {
        y += b;
    }
    leaky_in_place(&params.decay(), &mut y);
    Ok(y)
}

/// Single RF layer on its own: discretize, project, scan, threshold.
pub fn rf_layer_forward<T: Real>(params: &SsmLayerParams<T>, u: ArrayView2<T>, dt: T) -> Result<Array2<u8>> {
    params.validate()?;
    let spike = SpikeFunction { threshold: params.threshold.f64(), ..SpikeFunction::default() };
    let t = layer_forward(params, u.to_owned(), dt, &spike, SpikeMode::Hard, ScanStrategy::default())?;
    Ok(t.spikes.mapv(|s| u8::from(s != T::zero())))
}

/// Everything recorded during [`Model::forward`].
#[derive(Debug, Clone)]
pub struct ForwardTrace<T> {
    pub input: Array2<T>,
    pub layers: Vec<LayerTrace<T>>,
    pub readout: Array2<T>,
    pub logits: Array1<T>,
}

impl<T: Real> ForwardTrace<T> {
    pub fn spikes_per_layer(&self) -> Vec<u64> {
        self.layers.iter().map(LayerTrace::spike_count).collect()
    }
}

/// A configured network with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub params: ModelParams<T>,
}

fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize, var: f64) -> Array2<f64> {
    let normal = Normal::new(0.0, var.sqrt()).expect("finite variance");
    Array2::from_shape_fn((rows, cols), |_| normal.sample(rng))
}

impl Model<f64> {
    /// Initialize parameters from `config` (always in double precision).
    pub fn init(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let seed = config.seed;
        let h0 = config.layer_sizes[0];
        let mut enc_rng = rng::stream(seed, &[0xE0]);
        let encoder = Linear {
            weight: gaussian_matrix(&mut enc_rng, h0, config.input_dim, 1.0 / config.input_dim as f64),
            bias: config.encoder_bias.then(|| Array1::zeros(h0)),
        };

        let mut layers = Vec::with_capacity(config.layer_sizes.len());
        for (l, &h) in config.layer_sizes.iter().enumerate() {
            let h_in = config.layer_input_dim(l);
            let mode = if l == 0 && config.first_layer_mode == InputKind::ZohContinuous {
                Discretization::Zoh
            } else {
                Discretization::Dirac
            };
            let layer_seed = rng::derive_seed(seed, &[0x1A, l as u64]);
            let mut p = match config.init {
                InitScheme::Hippo => init_layer(h_in, h, config.block_size, layer_seed, mode)?,
                InitScheme::Random => init_layer_random(h_in, h, layer_seed, mode)?,
            };
            p.threshold = config.threshold;
            match config.eta_init {
                EtaInit::Constant { value } => p.log_eta.fill(value.ln()),
                EtaInit::LogUniform { min, max } => {
                    let mut r = rng::stream(seed, &[0xE7A, l as u64]);
                    let dist = Uniform::new_inclusive(min.ln(), max.ln()).map_err(|e| Error::config(e.to_string()))?;
                    p.log_eta.iter_mut().for_each(|v| *v = dist.sample(&mut r));
                }
            }
            if mode == Discretization::Zoh && config.init == InitScheme::Hippo && config.fixed_basis {
                p.fixed_basis = Some(hippo_block_basis(h, config.block_size)?);
            }
            layers.push(p);
        }

        let h_last = *config.layer_sizes.last().expect("validated non-empty");
        let mut ro_rng = rng::stream(seed, &[0x0D]);
        let readout = ReadoutParams {
            weight: gaussian_matrix(&mut ro_rng, config.num_classes, h_last, 1.0 / h_last as f64),
            bias: config.readout_bias.then(|| Array1::zeros(config.num_classes)),
            log_tau: Array1::from_elem(config.num_classes, config.readout_tau_init.ln()),
        };
        Ok(Model { config: config.clone(), params: ModelParams { encoder, layers, readout } })
    }
}

impl<T: Real> Model<T> {
    pub fn cast<U: Real>(&self) -> Model<U> {
        Model { config: self.config.clone(), params: self.params.cast() }
    }

    fn spike_fn(&self, l: usize) -> SpikeFunction {
        SpikeFunction { threshold: self.params.layers[l].threshold.f64(), surrogate: self.config.surrogate }
    }

    /// Run the network on one sequence `u: [L, input_dim]`.
    pub fn forward(&self, u: ArrayView2<T>, mode: SpikeMode) -> Result<ForwardTrace<T>> {
        if u.ncols() != self.config.input_dim {
            return Err(Error::input(format!(
                "model expects {} input channels, got {}",
                self.config.input_dim,
                u.ncols()
            )));
        }
        if u.nrows() == 0 {
            return Err(Error::input("empty input sequence"));
        }
        let dt = T::of(self.config.dt);
        let mut x = encoder_forward(self.params.encoder.weight.view(), u)?;
        if let Some(b) = &self.params.encoder.bias {
            x += b;
        }
        let mut layers: Vec<LayerTrace<T>> = Vec::with_capacity(self.params.layers.len());
        for (l, p) in self.params.layers.iter().enumerate() {
            let input = if l == 0 {
                x.clone()
            } else {
                let prev = &layers[l - 1];
                if self.config.skip_after(l - 1) {
                    &prev.spikes + &prev.input
                } else {
                    prev.spikes.clone()
                }
            };
            layers.push(layer_forward(p, input, dt, &self.spike_fn(l), mode, self.config.scan)?);
        }
        let last = layers.last().expect("at least one layer");
        let readout = readout_forward(&self.params.readout, last.spikes.view())?;
        let logits = readout.mean_axis(Axis(0)).expect("non-empty sequence");
        Ok(ForwardTrace { input: u.to_owned(), layers, readout, logits })
    }

    pub fn logits(&self, u: ArrayView2<T>) -> Result<Array1<T>> {
        Ok(self.forward(u, SpikeMode::Hard)?.logits)
    }

    /// Gradient of a scalar loss with respect to every learnable parameter,
    /// given `d_logits = ∂loss/∂logits` for the trace's sample.
    pub fn backward(&self, trace: &ForwardTrace<T>, d_logits: ArrayView1<T>, mode: SpikeMode) -> ModelParams<T> {
        let mut grads = self.params.zeros_like();
        let dt = T::of(self.config.dt);
        let len = trace.readout.nrows();
        let ro = &self.params.readout;

        // mean pooling, then the leaky integrator in reverse
        let mut g = Array2::from_shape_fn(trace.readout.raw_dim(), |(_, j)| d_logits[j] / T::of(len as f64));
        let decay = ro.decay();
        leaky_reverse_in_place(&decay, &mut g);
        for j in 0..decay.len() {
            let mut acc = T::zero();
            for k in 1..len {
                acc += g[[k, j]] * trace.readout[[k - 1, j]];
            }
            // d decay / d log_tau = decay · exp(-log_tau)
            grads.readout.log_tau[j] = acc * decay[j] * (-ro.log_tau[j]).exp();
        }
        let last = trace.layers.last().expect("at least one layer");
        grads.readout.weight = g.t().dot(&last.spikes);
        if let Some(b) = &mut grads.readout.bias {
            *b = g.sum_axis(Axis(0));
        }
        let mut d_out = g.dot(&ro.weight);

        let n = self.params.layers.len();
        // total cotangent of the input of layer l + 1
        let mut d_next_in: Option<Array2<T>> = None;
        for l in (0..n).rev() {
            let d_spikes = match &d_next_in {
                None => std::mem::take(&mut d_out),
                Some(d) => d.clone(),
            };
            let p = &self.params.layers[l];
            let mut d_in = layer_backward(
                p,
                &trace.layers[l],
                &d_spikes,
                dt,
                &self.spike_fn(l),
                mode,
                self.config.scan,
                &mut grads.layers[l],
            );
            if self.config.skip_after(l) {
                d_in += d_next_in.as_ref().expect("skip implies a following layer");
            }
            d_next_in = Some(d_in);
        }
        let d_enc = d_next_in.expect("at least one layer");
        grads.encoder.weight = d_enc.t().dot(&trace.input);
        if let Some(b) = &mut grads.encoder.bias {
            *b = d_enc.sum_axis(Axis(0));
        }
        grads
    }
}
