//! Layer primitives shared by every network in the crate.

use rand::Rng;

use crate::error::Result;
use crate::tensor::{Graph, Parameter, Tensor, Var};

/// Anything holding named trainable parameters.
pub trait Module {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Parameter));
    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Parameter));

    fn parameters(&self) -> Vec<&Parameter>
    where
        Self: Sized,
    {
        let mut out = Vec::new();
        self.visit_params(&mut |p| out.push(p));
        out
    }

    fn parameter_count(&self) -> usize
    where
        Self: Sized,
    {
        let mut n = 0;
        self.visit_params(&mut |p| n += p.tensor.len());
        n
    }
}

const INIT_STD: f64 = 0.02;

/// Affine map `x·W + b` with `W: in×out`, `b: out`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Parameter,
    pub bias: Parameter,
}

impl Linear {
    pub fn new<R: Rng>(name: &str, input: usize, output: usize, rng: &mut R) -> Self {
        Linear {
            weight: Parameter::new(
                format!("{name}.weight"),
                Tensor::randn(&[input, output], INIT_STD, rng),
            ),
            bias: Parameter::new(format!("{name}.bias"), Tensor::zeros(&[output])),
        }
    }

    pub fn forward<'g>(&self, g: &'g Graph, x: Var<'g>) -> Result<Var<'g>> {
        x.matmul(g.param(&self.weight))?.add_row(g.param(&self.bias))
    }
}

impl Module for Linear {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Parameter)) {
        f(&self.weight);
        f(&self.bias);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        f(&mut self.weight);
        f(&mut self.bias);
    }
}

/// Last-dimension layer normalization with learned affine.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: Parameter,
    pub beta: Parameter,
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

impl LayerNorm {
    pub fn new(name: &str, width: usize) -> Self {
        LayerNorm {
            gamma: Parameter::new(format!("{name}.gamma"), Tensor::full(&[width], 1.0)),
            beta: Parameter::new(format!("{name}.beta"), Tensor::zeros(&[width])),
        }
    }

    pub fn forward<'g>(&self, g: &'g Graph, x: Var<'g>) -> Result<Var<'g>> {
        x.layer_norm(g.param(&self.gamma), g.param(&self.beta), LAYER_NORM_EPS)
    }
}

impl Module for LayerNorm {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Parameter)) {
        f(&self.gamma);
        f(&self.beta);
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        f(&mut self.gamma);
        f(&mut self.beta);
    }
}

/// GELU MLP over rows.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

impl Mlp {
    /// `dims = [in, hidden..., out]`.
    pub fn new<R: Rng>(name: &str, dims: &[usize], rng: &mut R) -> Self {
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(&format!("{name}.{i}"), w[0], w[1], rng))
            .collect();
        Mlp { layers }
    }

    pub fn forward<'g>(&self, g: &'g Graph, mut x: Var<'g>) -> Result<Var<'g>> {
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(g, x)?;
            if i + 1 < self.layers.len() {
                x = x.gelu()?;
            }
        }
        Ok(x)
    }
}

impl Module for Mlp {
    fn visit_params<'a>(&'a self, f: &mut dyn FnMut(&'a Parameter)) {
        for l in &self.layers {
            l.visit_params(f);
        }
    }

    fn visit_params_mut(&mut self, f: &mut dyn FnMut(&mut Parameter)) {
        for l in &mut self.layers {
            l.visit_params_mut(f);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn linear_matches_affine_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut lin = Linear::new("l", 2, 3, &mut rng);
        lin.weight.tensor = Tensor::new(vec![2, 3], vec![1., 2., 3., 4., 5., 6.])
            .unwrap()
            .with_grad();
        lin.bias.tensor = Tensor::new(vec![3], vec![0.5, -0.5, 0.0]).unwrap().with_grad();
        let g = Graph::new();
        let x = g.constant(Tensor::new(vec![1, 2], vec![1.0, 1.0]).unwrap());
        let y = lin.forward(&g, x).unwrap().value();
        assert_eq!(y.data(), &[5.5, 6.5, 9.0]);
    }

    #[test]
    fn parameter_names_are_unique() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mlp = Mlp::new("head", &[4, 8, 1], &mut rng);
        let names: Vec<_> = mlp.parameters().iter().map(|p| p.name.clone()).collect();
        let unique: std::collections::HashSet<_> = names.iter().collect();
        assert_eq!(unique.len(), names.len());
    }
}
