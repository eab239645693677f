use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::layers::*;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::lcb::{lcb_apply, lcb_backward_slice, LcbParams};
use crate::numerics::{ComplexFrame, DomainTag, NoCount, SeededRng};

/// Where the logarithmic connect block sits when enabled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LcbPlacement {
    /// Applied to the raw RDM before the first convolution.
    #[default]
    Input,
    /// Applied to the bottleneck activations.
    Bottleneck,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetConfig {
    /// UNet levels (1 or 2).
    pub depth: usize,
    /// Complex channels at the first level.
    pub base_channels: usize,
    /// Spatial kernel size (odd).
    pub kernel: usize,
    pub use_lcb: bool,
    pub lcb: LcbParams,
    pub lcb_placement: LcbPlacement,
    /// Training patch (rows, cols).
    pub patch: [usize; 2],
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            depth: 1,
            base_channels: 2,
            kernel: 3,
            use_lcb: false,
            // junction at the 14 dB strong-target threshold over a unit floor
            lcb: LcbParams {
                w: 10f64.powf(14.0 / 20.0),
                epsilon: crate::lcb::DEFAULT_EPSILON,
            },
            lcb_placement: LcbPlacement::Input,
            patch: [64, 64],
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.depth) {
            return Err(Error::Parameter(format!("depth must be 1 or 2, got {}", self.depth)));
        }
        if self.base_channels == 0 {
            return Err(Error::Parameter("base_channels must be positive".into()));
        }
        if self.kernel % 2 == 0 {
            return Err(Error::Parameter(format!("kernel must be odd, got {}", self.kernel)));
        }
        self.lcb.validate()?;
        self.check_input(self.patch[0], self.patch[1])
    }

    pub fn check_input(&self, rows: usize, cols: usize) -> Result<()> {
        let f = 1 << self.depth;
        if rows == 0 || cols == 0 || rows % f != 0 || cols % f != 0 {
            return Err(Error::Dimension(format!(
                "input {rows}x{cols} not divisible by {f}"
            )));
        }
        Ok(())
    }
}

/// One registered parameter block.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSlice {
    pub name: String,
    pub offset: usize,
    pub len: usize,
    pub shape: Vec<usize>,
}

/// Flat real parameter store; each complex weight is an adjacent re/im pair.
#[derive(Clone, Debug, PartialEq)]
pub struct NetworkParams {
    pub values: Vec<f64>,
    pub registry: Vec<ParamSlice>,
}

impl NetworkParams {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn slice(&self, name: &str) -> Option<&ParamSlice> {
        self.registry.iter().find(|s| s.name == name)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn complex(&self, s: &ParamSlice) -> Vec<Complex64> {
        self.values[s.offset..s.offset + s.len]
            .chunks_exact(2)
            .map(|p| Complex64::new(p[0], p[1]))
            .collect()
    }
}

#[derive(Clone, Debug)]
struct ConvSpec {
    cin: usize,
    cout: usize,
    k: usize,
    w: ParamSlice,
    b: ParamSlice,
}

#[derive(Clone, Debug)]
struct UpSpec {
    cin: usize,
    cout: usize,
    w: ParamSlice,
    b: ParamSlice,
}

/// Layer layout derived from a [`NetConfig`].
#[derive(Clone, Debug)]
pub struct Network {
    cfg: NetConfig,
    enc: Vec<ConvSpec>,
    mid: ConvSpec,
    /// Decoder stages, outermost (level 0) last.
    up: Vec<UpSpec>,
    dec: Vec<ConvSpec>,
    head: ConvSpec,
    logit: ParamSlice,
    registry: Vec<ParamSlice>,
    total: usize,
}

struct Builder {
    offset: usize,
    registry: Vec<ParamSlice>,
}

impl Builder {
    fn add(&mut self, name: String, shape: Vec<usize>) -> ParamSlice {
        let len = shape.iter().product();
        let s = ParamSlice {
            name,
            offset: self.offset,
            len,
            shape,
        };
        self.offset += len;
        self.registry.push(s.clone());
        s
    }

    fn conv(&mut self, name: &str, cin: usize, cout: usize, k: usize) -> ConvSpec {
        ConvSpec {
            cin,
            cout,
            k,
            w: self.add(format!("{name}.w"), vec![cout, cin, k, k, 2]),
            b: self.add(format!("{name}.b"), vec![cout, 2]),
        }
    }

    fn up(&mut self, name: &str, cin: usize, cout: usize) -> UpSpec {
        UpSpec {
            cin,
            cout,
            w: self.add(format!("{name}.w"), vec![cin, cout, 2, 2, 2]),
            b: self.add(format!("{name}.b"), vec![cout, 2]),
        }
    }
}

/// Intermediate values kept for the backward pass.
pub struct ForwardCache {
    raw_input: Tensor,
    enc_in: Vec<Tensor>,
    enc_pre: Vec<Tensor>,
    enc_post: Vec<Tensor>,
    pool_arg: Vec<Vec<u32>>,
    mid_in: Tensor,
    mid_pre: Tensor,
    mid_act: Tensor,
    up_in: Vec<Tensor>,
    dec_in: Vec<Tensor>,
    dec_pre: Vec<Tensor>,
    head_in: Tensor,
    z: Tensor,
    mags: Vec<f64>,
    pub probs: Vec<f64>,
}

impl ForwardCache {
    pub fn shape(&self) -> (usize, usize) {
        (self.raw_input.height, self.raw_input.width)
    }
}

impl Network {
    pub fn new(cfg: &NetConfig) -> Result<Self> {
        cfg.validate()?;
        let c = cfg.base_channels;
        let k = cfg.kernel;
        let d = cfg.depth;
        let mut b = Builder {
            offset: 0,
            registry: Vec::new(),
        };
        let enc = (0..d)
            .map(|l| {
                let cin = if l == 0 { 1 } else { c << (l - 1) };
                b.conv(&format!("enc{l}.conv"), cin, c << l, k)
            })
            .collect();
        let mid = b.conv("mid.conv", c << (d - 1), c << d, k);
        let mut up = Vec::new();
        let mut dec = Vec::new();
        for l in (0..d).rev() {
            up.push(b.up(&format!("dec{l}.up"), c << (l + 1), c << l));
            dec.push(b.conv(&format!("dec{l}.conv"), 2 * (c << l), c << l, k));
        }
        let head = b.conv("head.conv", c, 1, 1);
        let logit = b.add("head.logit".into(), vec![2]);
        Ok(Self {
            cfg: cfg.clone(),
            enc,
            mid,
            up,
            dec,
            head,
            logit,
            total: b.offset,
            registry: b.registry,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.cfg
    }

    pub fn param_count(&self) -> usize {
        self.total
    }

    pub fn registry(&self) -> &[ParamSlice] {
        &self.registry
    }

    /// Random initial parameters: complex weights with variance `1/fan_in`
    /// split evenly over re/im, zero biases, unit logit scale, zero logit bias.
    pub fn init_params(&self, seed: u64) -> NetworkParams {
        let mut rng = SeededRng::new(seed, 0x1417);
        let mut values = vec![0.0; self.total];
        let convs = self.enc.iter().chain([&self.mid]).chain(&self.dec).chain([&self.head]);
        for cs in convs {
            let sd = (1.0 / (2.0 * (cs.cin * cs.k * cs.k) as f64)).sqrt();
            for v in &mut values[cs.w.offset..cs.w.offset + cs.w.len] {
                *v = sd * rng.standard_normal();
            }
        }
        for us in &self.up {
            let sd = (1.0 / (2.0 * us.cin as f64)).sqrt();
            for v in &mut values[us.w.offset..us.w.offset + us.w.len] {
                *v = sd * rng.standard_normal();
            }
        }
        values[self.logit.offset] = 1.0;
        values[self.logit.offset + 1] = 0.0;
        NetworkParams {
            values,
            registry: self.registry.clone(),
        }
    }

    pub fn check_params(&self, p: &NetworkParams) -> Result<()> {
        if p.values.len() != self.total {
            return Err(Error::Dimension(format!(
                "parameter store has {} values, network needs {}",
                p.values.len(),
                self.total
            )));
        }
        Ok(())
    }

    fn lcb_at(&self, place: LcbPlacement) -> Option<&LcbParams> {
        (self.cfg.use_lcb && self.cfg.lcb_placement == place).then_some(&self.cfg.lcb)
    }

    /// Probability map for one input frame.
    pub fn forward(&self, p: &NetworkParams, x: &ComplexFrame) -> Result<ComplexFrame> {
        let cache = self.forward_cached(p, &Tensor::from_frame(x))?;
        ComplexFrame::from_real(x.rows(), x.cols(), &cache.probs, DomainTag::ProbMap)
    }

    pub fn forward_cached(&self, p: &NetworkParams, x: &Tensor) -> Result<ForwardCache> {
        self.check_params(p)?;
        if x.channels != 1 {
            return Err(Error::Dimension(format!("expected 1 input channel, got {}", x.channels)));
        }
        self.cfg.check_input(x.height, x.width)?;

        let mut cur = x.clone();
        if let Some(lp) = self.lcb_at(LcbPlacement::Input) {
            lcb_apply(&x.data, &mut cur.data, lp, &mut NoCount);
        }
        let mut enc_in = Vec::new();
        let mut enc_pre = Vec::new();
        let mut enc_post = Vec::new();
        let mut pool_arg = Vec::new();
        for cs in &self.enc {
            let pre = conv2d_forward(&cur, &p.complex(&cs.w), &p.complex(&cs.b), cs.cout, cs.k);
            let post = crelu_forward(&pre);
            let (pooled, arg) = magpool_forward(&post);
            enc_in.push(std::mem::replace(&mut cur, pooled));
            enc_pre.push(pre);
            enc_post.push(post);
            pool_arg.push(arg);
        }
        let mid_in = cur;
        let mid_pre = conv2d_forward(&mid_in, &p.complex(&self.mid.w), &p.complex(&self.mid.b), self.mid.cout, self.mid.k);
        let mid_act = crelu_forward(&mid_pre);
        let mut cur = mid_act.clone();
        if let Some(lp) = self.lcb_at(LcbPlacement::Bottleneck) {
            lcb_apply(&mid_act.data, &mut cur.data, lp, &mut NoCount);
        }

        let mut up_in = Vec::new();
        let mut dec_in = Vec::new();
        let mut dec_pre = Vec::new();
        for (i, (us, ds)) in self.up.iter().zip(&self.dec).enumerate() {
            let level = self.cfg.depth - 1 - i;
            let up = convt_forward(&cur, &p.complex(&us.w), &p.complex(&us.b), us.cout);
            let skip = enc_post[level].centre_crop(up.height, up.width)?;
            let cat = Tensor::concat(&up, &skip)?;
            let pre = conv2d_forward(&cat, &p.complex(&ds.w), &p.complex(&ds.b), ds.cout, ds.k);
            up_in.push(cur);
            cur = crelu_forward(&pre);
            dec_in.push(cat);
            dec_pre.push(pre);
        }
        let head_in = cur;
        let z = conv2d_forward(&head_in, &p.complex(&self.head.w), &p.complex(&self.head.b), 1, 1);
        let (scale, bias) = (p.values[self.logit.offset], p.values[self.logit.offset + 1]);
        let (probs, mags) = head_forward(&z, scale, bias);
        Ok(ForwardCache {
            raw_input: x.clone(),
            enc_in,
            enc_pre,
            enc_post,
            pool_arg,
            mid_in,
            mid_pre,
            mid_act,
            up_in,
            dec_in,
            dec_pre,
            head_in,
            z,
            mags,
            probs,
        })
    }

    fn put(grads: &mut [f64], s: &ParamSlice, g: &[Complex64]) {
        for (pair, v) in grads[s.offset..s.offset + s.len].chunks_exact_mut(2).zip(g) {
            pair[0] += v.re;
            pair[1] += v.im;
        }
    }

    /// Gradients of the loss with respect to every parameter and the raw
    /// input, given `dL/d(logit)` per output cell.
    pub fn backward(&self, p: &NetworkParams, cache: &ForwardCache, grad_logit: &[f64]) -> (Vec<f64>, Tensor) {
        let mut grads = vec![0.0; self.total];
        let scale = p.values[self.logit.offset];
        let hg = head_backward(&cache.z, &cache.mags, scale, grad_logit);
        grads[self.logit.offset] += hg.scale;
        grads[self.logit.offset + 1] += hg.bias;
        let cg = conv2d_backward(&cache.head_in, &p.complex(&self.head.w), &hg.input, 1);
        Self::put(&mut grads, &self.head.w, &cg.weight);
        Self::put(&mut grads, &self.head.b, &cg.bias);
        let mut g = cg.input;

        let depth = self.cfg.depth;
        let mut skip_grads: Vec<Option<Tensor>> = vec![None; depth];
        for i in (0..self.up.len()).rev() {
            let (us, ds) = (&self.up[i], &self.dec[i]);
            let level = depth - 1 - i;
            let g_pre = crelu_backward(&cache.dec_pre[i], &g);
            let cg = conv2d_backward(&cache.dec_in[i], &p.complex(&ds.w), &g_pre, ds.k);
            Self::put(&mut grads, &ds.w, &cg.weight);
            Self::put(&mut grads, &ds.b, &cg.bias);
            let (g_up, g_skip) = cg.input.split(us.cout);
            skip_grads[level] = Some(cache.enc_post[level].uncrop(&g_skip));
            let ug = convt_backward(&cache.up_in[i], &p.complex(&us.w), &g_up);
            Self::put(&mut grads, &us.w, &ug.weight);
            Self::put(&mut grads, &us.b, &ug.bias);
            g = ug.input;
        }

        if let Some(lp) = self.lcb_at(LcbPlacement::Bottleneck) {
            let mut gin = g.clone();
            lcb_backward_slice(&cache.mid_act.data, &g.data, &mut gin.data, lp);
            g = gin;
        }
        let g_pre = crelu_backward(&cache.mid_pre, &g);
        let cg = conv2d_backward(&cache.mid_in, &p.complex(&self.mid.w), &g_pre, self.mid.k);
        Self::put(&mut grads, &self.mid.w, &cg.weight);
        Self::put(&mut grads, &self.mid.b, &cg.bias);
        g = cg.input;

        for l in (0..depth).rev() {
            let cs = &self.enc[l];
            let post = &cache.enc_post[l];
            let mut g_post = magpool_backward((post.channels, post.height, post.width), &cache.pool_arg[l], &g);
            if let Some(sg) = skip_grads[l].take() {
                g_post.add_assign(&sg);
            }
            let g_pre = crelu_backward(&cache.enc_pre[l], &g_post);
            let cg = conv2d_backward(&cache.enc_in[l], &p.complex(&cs.w), &g_pre, cs.k);
            Self::put(&mut grads, &cs.w, &cg.weight);
            Self::put(&mut grads, &cs.b, &cg.bias);
            g = cg.input;
        }

        if let Some(lp) = self.lcb_at(LcbPlacement::Input) {
            let mut gin = g.clone();
            lcb_backward_slice(&cache.raw_input.data, &g.data, &mut gin.data, lp);
            g = gin;
        }
        (grads, g)
    }

    /// Complex multiply-accumulates of one forward pass on a `rows x cols`
    /// input, and the real MACs spent in the LCB stage.
    pub fn forward_macs(&self, rows: usize, cols: usize) -> (u64, u64) {
        let mut complex = 0u64;
        let mut px = (rows * cols) as u64;
        for cs in &self.enc {
            complex += px * (cs.cin * cs.cout * cs.k * cs.k) as u64;
            px /= 4;
        }
        complex += px * (self.mid.cin * self.mid.cout * self.mid.k * self.mid.k) as u64;
        let lcb_px = match self.cfg.lcb_placement {
            LcbPlacement::Input => (rows * cols) as u64,
            LcbPlacement::Bottleneck => px * self.mid.cout as u64,
        };
        for (us, ds) in self.up.iter().zip(&self.dec) {
            complex += px * (us.cin * us.cout * 4) as u64;
            px *= 4;
            complex += px * (ds.cin * ds.cout * ds.k * ds.k) as u64;
        }
        complex += px * self.head.cin as u64;
        let lcb = if self.cfg.use_lcb {
            lcb_px * crate::lcb::MACS_PER_ELEMENT
        } else {
            0
        };
        (complex, lcb)
    }
}
