//! A small configurable convolutional denoiser for 2D patches, with
//! hand-rolled backprop and Adam. Layers are zero-padded so spatial
//! shape is preserved; an optional residual connection adds the input
//! to the network output.
//!
//! Weight files ("CNW1") carry a text header — one `conv` line per
//! layer, a `residual` line, then `data:` — followed by float64
//! little-endian weights, each layer as [out][in][k][k] then bias[out].

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::array::NdArrayF;
use crate::error::{CoreError, Result};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    None,
}

#[derive(Debug, Clone)]
pub struct LayerSpec {
    /// square kernel side, odd
    pub kernel: usize,
    pub in_ch: usize,
    pub out_ch: usize,
    pub bias: bool,
    pub activation: Activation,
}

impl LayerSpec {
    fn weight_count(&self) -> usize {
        self.out_ch * self.in_ch * self.kernel * self.kernel
            + if self.bias { self.out_ch } else { 0 }
    }
}

#[derive(Debug, Clone)]
pub struct ConvNetSpec {
    pub layers: Vec<LayerSpec>,
    /// output = input + net(input)
    pub residual: bool,
}

impl ConvNetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(CoreError::InvalidArgument("net needs >= 1 layer".into()));
        }
        if self.layers[0].in_ch != 1 || self.layers.last().unwrap().out_ch != 1 {
            return Err(CoreError::InvalidArgument(
                "first in-channels and last out-channels must be 1".into(),
            ));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.kernel == 0 || l.kernel % 2 == 0 {
                return Err(CoreError::InvalidArgument(format!(
                    "layer {i}: kernel side {} must be odd",
                    l.kernel
                )));
            }
            if l.in_ch == 0 || l.out_ch == 0 {
                return Err(CoreError::InvalidArgument(format!(
                    "layer {i}: zero channel count"
                )));
            }
            if i > 0 && l.in_ch != self.layers[i - 1].out_ch {
                return Err(CoreError::InvalidArgument(format!(
                    "layer {i}: in-channels {} != previous out-channels {}",
                    l.in_ch,
                    self.layers[i - 1].out_ch
                )));
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight_count()).sum()
    }

    /// The default denoiser: 3×3 conv 1→8→8→1, ReLU between, residual.
    pub fn default_denoiser() -> Self {
        let layer = |in_ch, out_ch, activation| LayerSpec {
            kernel: 3,
            in_ch,
            out_ch,
            bias: true,
            activation,
        };
        ConvNetSpec {
            layers: vec![
                layer(1, 8, Activation::Relu),
                layer(8, 8, Activation::Relu),
                layer(8, 1, Activation::None),
            ],
            residual: true,
        }
    }
}

/// A spec plus its flat weight vector.
#[derive(Debug, Clone)]
pub struct ConvNet {
    spec: ConvNetSpec,
    weights: Vec<f64>,
}

impl ConvNet {
    pub fn new(spec: ConvNetSpec, weights: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        if weights.len() != spec.param_count() {
            return Err(CoreError::InvalidArgument(format!(
                "weight count {} != spec parameter count {}",
                weights.len(),
                spec.param_count()
            )));
        }
        Ok(ConvNet { spec, weights })
    }

    /// Seeded uniform init in ±sqrt(6/(fan_in+fan_out)); biases zero.
    pub fn init(spec: ConvNetSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = substream(seed, "convnet-init");
        let mut weights = Vec::with_capacity(spec.param_count());
        for l in &spec.layers {
            let fan_in = (l.in_ch * l.kernel * l.kernel) as f64;
            let fan_out = (l.out_ch * l.kernel * l.kernel) as f64;
            let bound = (6.0 / (fan_in + fan_out)).sqrt();
            for _ in 0..l.out_ch * l.in_ch * l.kernel * l.kernel {
                weights.push(rng.gen_range(-bound..bound));
            }
            if l.bias {
                weights.extend(std::iter::repeat(0.0).take(l.out_ch));
            }
        }
        Ok(ConvNet { spec, weights })
    }

    pub fn spec(&self) -> &ConvNetSpec {
        &self.spec
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    fn layer_offsets(&self) -> Vec<usize> {
        let mut offs = Vec::with_capacity(self.spec.layers.len());
        let mut o = 0;
        for l in &self.spec.layers {
            offs.push(o);
            o += l.weight_count();
        }
        offs
    }

    /// Forward pass on a 2D patch; spatial shape preserved.
    pub fn forward(&self, patch: &NdArrayF) -> Result<NdArrayF> {
        let (acts, _) = self.forward_trace(patch)?;
        let out = acts.last().unwrap()[0].clone();
        let mut out = NdArrayF::new(patch.shape().to_vec(), out)?;
        if self.spec.residual {
            out.add_scaled(patch, 1.0)?;
        }
        Ok(out)
    }

    /// Per-layer activations and pre-activations; index 0 is the input.
    #[allow(clippy::type_complexity)]
    fn forward_trace(
        &self,
        patch: &NdArrayF,
    ) -> Result<(Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<f64>>>)> {
        if patch.ndim() != 2 {
            return Err(CoreError::InvalidArgument(format!(
                "convnet patches must be 2D, got shape {:?}",
                patch.shape()
            )));
        }
        let (h, w) = (patch.shape()[0], patch.shape()[1]);
        let offsets = self.layer_offsets();
        let mut acts: Vec<Vec<Vec<f64>>> = vec![vec![patch.data().to_vec()]];
        let mut pre: Vec<Vec<Vec<f64>>> = Vec::with_capacity(self.spec.layers.len());
        for (li, l) in self.spec.layers.iter().enumerate() {
            let input = &acts[li];
            let k = l.kernel;
            let pad = (k / 2) as isize;
            let wbase = offsets[li];
            let bias_base = wbase + l.out_ch * l.in_ch * k * k;
            let mut z: Vec<Vec<f64>> = Vec::with_capacity(l.out_ch);
            for o in 0..l.out_ch {
                let b = if l.bias {
                    self.weights[bias_base + o]
                } else {
                    0.0
                };
                let mut plane = vec![b; h * w];
                for i in 0..l.in_ch {
                    let kbase = wbase + (o * l.in_ch + i) * k * k;
                    let src = &input[i];
                    for dy in 0..k {
                        for dx in 0..k {
                            let wgt = self.weights[kbase + dy * k + dx];
                            if wgt == 0.0 {
                                continue;
                            }
                            let oy = dy as isize - pad;
                            let ox = dx as isize - pad;
                            let y0 = 0.max(-oy) as usize;
                            let y1 = (h as isize).min(h as isize - oy) as usize;
                            let x0 = 0.max(-ox) as usize;
                            let x1 = (w as isize).min(w as isize - ox) as usize;
                            for y in y0..y1 {
                                let srow = ((y as isize + oy) as usize) * w;
                                let drow = y * w;
                                for x in x0..x1 {
                                    plane[drow + x] +=
                                        wgt * src[srow + (x as isize + ox) as usize];
                                }
                            }
                        }
                    }
                }
                z.push(plane);
            }
            let a: Vec<Vec<f64>> = match l.activation {
                Activation::Relu => z
                    .iter()
                    .map(|p| p.iter().map(|&v| v.max(0.0)).collect())
                    .collect(),
                Activation::None => z.clone(),
            };
            pre.push(z);
            acts.push(a);
        }
        Ok((acts, pre))
    }

    /// Mean over samples of ‖net(noisy) − clean‖² and its gradient with
    /// respect to every weight.
    pub fn loss_and_gradient(&self, samples: &[(NdArrayF, NdArrayF)]) -> Result<(f64, Vec<f64>)> {
        if samples.is_empty() {
            return Err(CoreError::InvalidArgument("empty batch".into()));
        }
        let n = samples.len() as f64;
        let per_sample: Vec<(f64, Vec<f64>)> = samples
            .par_iter()
            .map(|(noisy, clean)| self.sample_loss_grad(noisy, clean))
            .collect::<Result<_>>()?;
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.weights.len()];
        for (l, g) in &per_sample {
            loss += l;
            for (gd, gv) in grad.iter_mut().zip(g.iter()) {
                *gd += gv;
            }
        }
        loss /= n;
        for g in &mut grad {
            *g /= n;
        }
        if !loss.is_finite() {
            return Err(CoreError::Numerical(format!("non-finite loss {loss}")));
        }
        Ok((loss, grad))
    }

    fn sample_loss_grad(&self, noisy: &NdArrayF, clean: &NdArrayF) -> Result<(f64, Vec<f64>)> {
        noisy.same_shape(clean)?;
        let (h, w) = (noisy.shape()[0], noisy.shape()[1]);
        let (acts, pre) = self.forward_trace(noisy)?;
        let n_layers = self.spec.layers.len();
        let offsets = self.layer_offsets();

        // output and loss
        let last = &acts[n_layers][0];
        let mut out: Vec<f64> = last.clone();
        if self.spec.residual {
            for (o, &x) in out.iter_mut().zip(noisy.data().iter()) {
                *o += x;
            }
        }
        let mut loss = 0.0;
        let mut delta: Vec<Vec<f64>> = vec![vec![0.0; h * w]];
        for p in 0..h * w {
            let d = out[p] - clean.data()[p];
            loss += d * d;
            delta[0][p] = 2.0 * d;
        }

        let mut grad = vec![0.0; self.weights.len()];
        for li in (0..n_layers).rev() {
            let l = &self.spec.layers[li];
            let k = l.kernel;
            let pad = (k / 2) as isize;
            let wbase = offsets[li];
            let bias_base = wbase + l.out_ch * l.in_ch * k * k;
            // activation backward
            let mut dz = delta;
            if l.activation == Activation::Relu {
                for (o, plane) in dz.iter_mut().enumerate() {
                    for (p, v) in plane.iter_mut().enumerate() {
                        if pre[li][o][p] <= 0.0 {
                            *v = 0.0;
                        }
                    }
                }
            }
            // weight and bias gradients
            let input = &acts[li];
            for o in 0..l.out_ch {
                if l.bias {
                    grad[bias_base + o] += dz[o].iter().sum::<f64>();
                }
                for i in 0..l.in_ch {
                    let kbase = wbase + (o * l.in_ch + i) * k * k;
                    for dy in 0..k {
                        for dx in 0..k {
                            let oy = dy as isize - pad;
                            let ox = dx as isize - pad;
                            let y0 = 0.max(-oy) as usize;
                            let y1 = (h as isize).min(h as isize - oy) as usize;
                            let x0 = 0.max(-ox) as usize;
                            let x1 = (w as isize).min(w as isize - ox) as usize;
                            let mut acc = 0.0;
                            for y in y0..y1 {
                                let srow = ((y as isize + oy) as usize) * w;
                                let drow = y * w;
                                for x in x0..x1 {
                                    acc += dz[o][drow + x]
                                        * input[i][srow + (x as isize + ox) as usize];
                                }
                            }
                            grad[kbase + dy * k + dx] += acc;
                        }
                    }
                }
            }
            // input gradient for the next layer down
            if li > 0 {
                let mut dinput = vec![vec![0.0; h * w]; l.in_ch];
                for o in 0..l.out_ch {
                    for i in 0..l.in_ch {
                        let kbase = wbase + (o * l.in_ch + i) * k * k;
                        for dy in 0..k {
                            for dx in 0..k {
                                let wgt = self.weights[kbase + dy * k + dx];
                                if wgt == 0.0 {
                                    continue;
                                }
                                let oy = dy as isize - pad;
                                let ox = dx as isize - pad;
                                let y0 = 0.max(-oy) as usize;
                                let y1 = (h as isize).min(h as isize - oy) as usize;
                                let x0 = 0.max(-ox) as usize;
                                let x1 = (w as isize).min(w as isize - ox) as usize;
                                for y in y0..y1 {
                                    let srow = ((y as isize + oy) as usize) * w;
                                    let drow = y * w;
                                    for x in x0..x1 {
                                        dinput[i][srow + (x as isize + ox) as usize] +=
                                            wgt * dz[o][drow + x];
                                    }
                                }
                            }
                        }
                    }
                }
                delta = dinput;
            } else {
                delta = dz;
            }
        }
        Ok((loss, grad))
    }

    /// Write CNW1 to `path`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let inner = || -> std::io::Result<()> {
            let mut w = BufWriter::new(File::create(path)?);
            writeln!(w, "CNW1")?;
            for l in &self.spec.layers {
                writeln!(
                    w,
                    "conv {} {} {} {} {}",
                    l.kernel,
                    l.in_ch,
                    l.out_ch,
                    if l.bias { 1 } else { 0 },
                    match l.activation {
                        Activation::Relu => "relu",
                        Activation::None => "none",
                    }
                )?;
            }
            writeln!(w, "residual {}", if self.spec.residual { 1 } else { 0 })?;
            writeln!(w, "data:")?;
            for v in &self.weights {
                w.write_all(&v.to_le_bytes())?;
            }
            w.flush()
        };
        inner().map_err(|e| CoreError::io(path, e))
    }

    /// Read CNW1 from `path`.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| CoreError::io(path, e))?;
        let mut r = BufReader::new(file);
        let malformed = |reason: &str| CoreError::Malformed {
            path: path.into(),
            reason: reason.into(),
        };

        let mut line = String::new();
        r.read_line(&mut line).map_err(|e| CoreError::io(path, e))?;
        if line.trim_end() != "CNW1" {
            return Err(CoreError::BadMagic { path: path.into() });
        }
        let mut layers = Vec::new();
        let mut residual = None;
        loop {
            line.clear();
            let n = r.read_line(&mut line).map_err(|e| CoreError::io(path, e))?;
            if n == 0 {
                return Err(malformed("missing data: line"));
            }
            let t = line.trim_end();
            if t == "data:" {
                break;
            }
            let mut parts = t.split_whitespace();
            match parts.next() {
                Some("conv") => {
                    let nums: Vec<&str> = parts.collect();
                    if nums.len() != 5 {
                        return Err(malformed("conv line needs 5 fields"));
                    }
                    let parse = |s: &str| {
                        s.parse::<usize>()
                            .map_err(|_| malformed(&format!("bad integer '{s}'")))
                    };
                    layers.push(LayerSpec {
                        kernel: parse(nums[0])?,
                        in_ch: parse(nums[1])?,
                        out_ch: parse(nums[2])?,
                        bias: parse(nums[3])? != 0,
                        activation: match nums[4] {
                            "relu" => Activation::Relu,
                            "none" => Activation::None,
                            other => return Err(malformed(&format!("bad activation '{other}'"))),
                        },
                    });
                }
                Some("residual") => {
                    let v = parts
                        .next()
                        .ok_or_else(|| malformed("residual line needs a flag"))?;
                    residual = Some(v == "1");
                }
                _ => return Err(malformed(&format!("unknown header line '{t}'"))),
            }
        }
        let spec = ConvNetSpec {
            layers,
            residual: residual.ok_or_else(|| malformed("missing residual line"))?,
        };
        spec.validate()?;
        let count = spec.param_count();
        let mut payload = Vec::new();
        r.read_to_end(&mut payload)
            .map_err(|e| CoreError::io(path, e))?;
        if payload.len() != count * 8 {
            return Err(CoreError::Truncated {
                path: path.into(),
                expected: (count * 8) as u64,
                got: payload.len() as u64,
            });
        }
        let weights = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        ConvNet::new(spec, weights)
    }
}

/// Adam hyperparameters and the training schedule.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
        }
    }
}

/// Loss trace: dataset loss before training, the mean batch loss per
/// epoch, and the dataset loss after training.
#[derive(Debug, Clone)]
pub struct TrainLog {
    pub initial_loss: f64,
    pub epoch_losses: Vec<f64>,
    pub final_loss: f64,
}

/// Minimize the mean squared patch error over (noisy, clean) pairs
/// with Adam; deterministic per `cfg.seed`.
pub fn train(
    spec: ConvNetSpec,
    dataset: &[(NdArrayF, NdArrayF)],
    cfg: &TrainConfig,
) -> Result<(ConvNet, TrainLog)> {
    if dataset.is_empty() {
        return Err(CoreError::InvalidArgument("empty training dataset".into()));
    }
    if cfg.learning_rate <= 0.0 || cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(CoreError::InvalidArgument(
            "learning rate, epochs and batch size must be positive".into(),
        ));
    }
    let mut net = ConvNet::init(spec, cfg.seed)?;
    let initial_loss = net.loss_and_gradient(dataset)?.0;

    let mut m = vec![0.0; net.weights.len()];
    let mut v = vec![0.0; net.weights.len()];
    let mut step = 0usize;
    let mut shuffle_rng = substream(cfg.seed, "train-shuffle");
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    for _epoch in 0..cfg.epochs {
        // Fisher-Yates from the labeled substream
        for i in (1..order.len()).rev() {
            let j = shuffle_rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(NdArrayF, NdArrayF)> = chunk
                .iter()
                .map(|&i| (dataset[i].0.clone(), dataset[i].1.clone()))
                .collect();
            let (loss, grad) = net.loss_and_gradient(&batch)?;
            epoch_loss += loss;
            batches += 1;
            step += 1;
            let b1t = 1.0 - cfg.beta1.powi(step as i32);
            let b2t = 1.0 - cfg.beta2.powi(step as i32);
            for (i, g) in grad.iter().enumerate() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g * g;
                let mh = m[i] / b1t;
                let vh = v[i] / b2t;
                net.weights[i] -= cfg.learning_rate * mh / (vh.sqrt() + cfg.eps);
            }
        }
        epoch_losses.push(epoch_loss / batches as f64);
    }
    let final_loss = net.loss_and_gradient(dataset)?.0;
    if final_loss >= initial_loss {
        return Err(CoreError::Numerical(format!(
            "training did not reduce the loss: {initial_loss} -> {final_loss}"
        )));
    }
    Ok((
        net,
        TrainLog {
            initial_loss,
            epoch_losses,
            final_loss,
        },
    ))
}
