//! Class-conditional sampling by composing the unconditional ratio with a
//! classifier.
//!
//! A softmax classifier is itself a density ratio: with equally likely
//! classes, `N p(y=n|x) = p(x|y=n) / p(x)`. Dividing the unconditional
//! estimate `r(x) = q(x)/p(x)` by the class posterior therefore retargets
//! the flow at `p(x|y=n)`. In log form (the LR-KL variant) the composed
//! drift is
//!
//! ```text
//! grad_x [ log r(x) - phi * log p(y=n|x) ]
//! ```
//!
//! where `phi` rescales the classifier's gradients to a magnitude comparable
//! with the ratio's, and the constant `-log N` drops out of the gradient.
//! Only the KL log-ratio composition is implemented; how `phi` should enter
//! the JS/logD drifts is not defined.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::{Prior, TargetSpec};
use crate::divergence::FDivergence;
use crate::flow::{sample_with_field, DriftField, FlowConfig, ParticleBatch};
use crate::matrix::Matrix;
use crate::nn::{adam_step, Activation, AdamState, DensityRatioModel, Head, Mlp};
use crate::rng::{stream, StreamRole};
use crate::{Error, Result};

const WEIGHT_SUM_TOL: f64 = 1e-9;

/// A classifier over `N` classes.
#[derive(Debug, Clone)]
pub enum Classifier {
    /// Exact Bayes posterior of an isotropic Gaussian mixture.
    ///
    /// Weights may include zeros (a degenerate class) but must be
    /// nonnegative and sum to 1.
    AnalyticBayes {
        weights: Vec<f64>,
        means: Vec<Vec<f64>>,
        var: f64,
    },
    /// A softmax head over an MLP trained with cross-entropy.
    LearnedSoftmax { mlp: Mlp },
}

impl Classifier {
    pub fn analytic_bayes(weights: Vec<f64>, means: Vec<Vec<f64>>, var: f64) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() {
            return Err(Error::InvalidParameter {
                what: "classifier weights and means must be nonempty and equal-length".into(),
            });
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::InvalidParameter {
                what: "classifier weights must be nonnegative".into(),
            });
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidParameter {
                what: format!("classifier weights must sum to 1, got {sum}"),
            });
        }
        if !(var > 0.0) {
            return Err(Error::InvalidParameter {
                what: format!("classifier variance must be positive, got {var}"),
            });
        }
        let d = means[0].len();
        if d == 0 || means.iter().any(|m| m.len() != d) {
            return Err(Error::InvalidParameter {
                what: "classifier means must share a nonzero dimension".into(),
            });
        }
        Ok(Classifier::AnalyticBayes { weights, means, var })
    }

    /// Builds the exact Bayes classifier of a Gaussian-mixture target.
    pub fn from_mixture(spec: &TargetSpec) -> Result<Self> {
        match spec {
            TargetSpec::GaussianMixture { weights, means, var } => {
                Self::analytic_bayes(weights.clone(), means.clone(), *var)
            }
            other => Err(Error::InvalidParameter {
                what: format!("AnalyticBayes needs a Gaussian mixture target, got {other:?}"),
            }),
        }
    }

    pub fn class_count(&self) -> usize {
        match self {
            Classifier::AnalyticBayes { weights, .. } => weights.len(),
            Classifier::LearnedSoftmax { mlp } => mlp.output_dim(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Classifier::AnalyticBayes { means, .. } => means[0].len(),
            Classifier::LearnedSoftmax { mlp } => mlp.input_dim(),
        }
    }
}

/// Conditional-sampling controls: the class to target and the classifier
/// gradient scale `phi` (0.1 in the reference setup).
#[derive(Debug, Clone, Copy)]
pub struct ConditionalSpec {
    pub class_index: usize,
    pub phi: f64,
}

impl ConditionalSpec {
    pub fn new(class_index: usize, phi: f64) -> Result<Self> {
        if !(phi >= 0.0) {
            return Err(Error::InvalidParameter {
                what: format!("phi must be nonnegative, got {phi}"),
            });
        }
        Ok(Self { class_index, phi })
    }

    fn check_class(&self, clf: &Classifier) -> Result<()> {
        if self.class_index >= clf.class_count() {
            return Err(Error::InvalidParameter {
                what: format!(
                    "class index {} out of range for {} classes",
                    self.class_index,
                    clf.class_count()
                ),
            });
        }
        Ok(())
    }
}

/// `log p(y = n | x)` per sample.
pub fn class_log_prob(clf: &Classifier, class: usize, x: &Matrix) -> Result<Vec<f64>> {
    ConditionalSpec::new(class, 0.0)?.check_class(clf)?;
    let (lp, _) = posterior_terms(clf, class, x, false)?;
    Ok(lp)
}

/// `grad_x log p(y = n | x)` per sample.
pub fn class_log_prob_grad(clf: &Classifier, class: usize, x: &Matrix) -> Result<Matrix> {
    ConditionalSpec::new(class, 0.0)?.check_class(clf)?;
    let (_, grad) = posterior_terms(clf, class, x, true)?;
    Ok(grad.expect("gradient requested"))
}

fn posterior_terms(
    clf: &Classifier,
    class: usize,
    x: &Matrix,
    want_grad: bool,
) -> Result<(Vec<f64>, Option<Matrix>)> {
    if x.cols() != clf.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "classifier input dim",
            expected: clf.input_dim(),
            got: x.cols(),
        });
    }
    match clf {
        Classifier::AnalyticBayes { weights, means, var } => {
            let n = x.rows();
            let d = x.cols();
            let k = weights.len();
            let mut lp = vec![0.0; n];
            let mut grad = want_grad.then(|| Matrix::zeros(n, d));
            let mut scores = vec![0.0; k];
            for i in 0..n {
                let row = x.row(i);
                for (j, score) in scores.iter_mut().enumerate() {
                    *score = if weights[j] > 0.0 {
                        let sq: f64 = row
                            .iter()
                            .zip(&means[j])
                            .map(|(a, b)| (a - b) * (a - b))
                            .sum();
                        weights[j].ln() - 0.5 * sq / var
                    } else {
                        f64::NEG_INFINITY
                    };
                }
                let lse = log_sum_exp(&scores);
                lp[i] = scores[class] - lse;
                if let Some(g) = grad.as_mut() {
                    // grad log N_n - sum_j post_j grad log N_j
                    let out = g.row_mut(i);
                    for (j, &score) in scores.iter().enumerate() {
                        let post = (score - lse).exp();
                        if post == 0.0 {
                            continue;
                        }
                        for a in 0..d {
                            out[a] += post * (row[a] - means[j][a]) / var;
                        }
                    }
                    for a in 0..d {
                        out[a] -= (row[a] - means[class][a]) / var;
                    }
                }
            }
            Ok((lp, grad))
        }
        Classifier::LearnedSoftmax { mlp } => {
            if want_grad {
                let (logits, grads) = mlp.forward_input_grads_with(x, |_, out, cot| {
                    let lse = log_sum_exp(out);
                    for (c, &o) in cot.iter_mut().zip(out.iter()) {
                        *c = -((o - lse).exp());
                    }
                    cot[class] += 1.0;
                })?;
                let lp = logits
                    .iter_rows()
                    .map(|row| row[class] - log_sum_exp(row))
                    .collect();
                Ok((lp, Some(grads)))
            } else {
                let logits = mlp.forward_batch(x)?;
                let lp = logits
                    .iter_rows()
                    .map(|row| row[class] - log_sum_exp(row))
                    .collect();
                Ok((lp, None))
            }
        }
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + v.iter().map(|&x| (x - m).exp()).sum::<f64>().ln()
}

/// Drift of the composed conditional ratio under the KL flow:
/// `grad s(x) - phi * grad log p(y=n|x)`.
pub struct ConditionalDrift<'a> {
    model: &'a DensityRatioModel,
    classifier: &'a Classifier,
    spec: ConditionalSpec,
}

impl<'a> ConditionalDrift<'a> {
    pub fn new(
        model: &'a DensityRatioModel,
        divergence: FDivergence,
        classifier: &'a Classifier,
        spec: ConditionalSpec,
    ) -> Result<Self> {
        if model.head() != Head::LogRatio {
            return Err(Error::UnsupportedHead {
                context: "conditional drift",
            });
        }
        if divergence != FDivergence::Kl {
            return Err(Error::InvalidParameter {
                what: format!(
                    "conditional flow is defined for the KL divergence only, got {:?}",
                    divergence
                ),
            });
        }
        spec.check_class(classifier)?;
        if model.input_dim() != classifier.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "conditional drift input dim",
                expected: model.input_dim(),
                got: classifier.input_dim(),
            });
        }
        Ok(Self {
            model,
            classifier,
            spec,
        })
    }
}

impl DriftField for ConditionalDrift<'_> {
    fn evaluate(&self, x: &Matrix) -> Result<Matrix> {
        // KL chain factor is 1, so the drift is grad s - phi * grad log post.
        let (outs, mut grads) = self.model.forward_scaled_input_grads(x, |_| 1.0)?;
        if let Some(index) = outs.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteOutput { which: "drift", index });
        }
        if self.spec.phi != 0.0 {
            let post_grad = class_log_prob_grad(self.classifier, self.spec.class_index, x)?;
            let phi = self.spec.phi;
            for (g, pg) in grads.as_mut_slice().iter_mut().zip(post_grad.as_slice()) {
                *g -= phi * pg;
            }
        }
        Ok(grads)
    }
}

/// Spec-named wrapper: evaluates the conditional drift at `x`.
pub fn conditional_drift(
    model: &DensityRatioModel,
    divergence: FDivergence,
    classifier: &Classifier,
    spec: ConditionalSpec,
    x: &Matrix,
) -> Result<Matrix> {
    ConditionalDrift::new(model, divergence, classifier, spec)?.evaluate(x)
}

/// Two-stage sampling with the conditional drift in place of the
/// unconditional one.
pub fn conditional_sample(
    model: &DensityRatioModel,
    classifier: &Classifier,
    spec: ConditionalSpec,
    prior: &Prior,
    cfg: &FlowConfig,
    n: usize,
    seed: u64,
) -> Result<ParticleBatch> {
    let field = ConditionalDrift::new(model, cfg.divergence, classifier, spec)?;
    sample_with_field(&field, prior, cfg, n, seed)
}

/// Trains a softmax MLP classifier on labeled draws from a Gaussian mixture
/// by cross-entropy. Uses the same network machinery as the ratio model.
pub fn train_softmax_classifier(
    mixture: &TargetSpec,
    hidden: &[usize],
    steps: usize,
    batch: usize,
    lr: f64,
    seed: u64,
) -> Result<Classifier> {
    let TargetSpec::GaussianMixture { weights, means, var } = mixture else {
        return Err(Error::InvalidParameter {
            what: "softmax classifier training needs a Gaussian mixture target".into(),
        });
    };
    mixture.validate()?;
    let k = weights.len();
    let d = means[0].len();
    let mut dims = vec![d];
    dims.extend_from_slice(hidden);
    dims.push(k);
    let mut mlp = Mlp::new_seeded(&dims, Activation::Softplus, seed)?;
    let mut params = mlp.param_vector();
    let mut adam = AdamState::new(params.len());
    let mut rng = stream(seed, StreamRole::Target, 1);
    let sd = var.sqrt();

    let mut x = Matrix::zeros(batch, d);
    let mut labels = vec![0usize; batch];
    for _ in 0..steps {
        for i in 0..batch {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut class = k - 1;
            for (j, w) in weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    class = j;
                    break;
                }
            }
            labels[i] = class;
            let row = x.row_mut(i);
            for (v, m) in row.iter_mut().zip(&means[class]) {
                *v = m + sd * rng.sample::<f64, _>(StandardNormal);
            }
        }
        let logits = mlp.forward_batch(&x)?;
        let mut cot = Matrix::zeros(batch, k);
        for i in 0..batch {
            let row = logits.row(i);
            let lse = log_sum_exp(row);
            let out = cot.row_mut(i);
            for j in 0..k {
                out[j] = ((row[j] - lse).exp() - if j == labels[i] { 1.0 } else { 0.0 })
                    / batch as f64;
            }
        }
        let (grads, _) = mlp.backward_batch(&x, &cot)?;
        adam_step(&mut adam, &mut params, &grads, lr)?;
        mlp.set_param_vector(&params)?;
    }
    Ok(Classifier::LearnedSoftmax { mlp })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{sample, ModelDrift};
    use crate::nn::Layer;

    fn two_mixture(sep: f64, var: f64) -> Classifier {
        Classifier::analytic_bayes(
            vec![0.5, 0.5],
            vec![vec![-sep / 2.0, 0.0], vec![sep / 2.0, 0.0]],
            var,
        )
        .unwrap()
    }

    fn linear_log_ratio_model(w: Vec<f64>, b: f64) -> DensityRatioModel {
        let d = w.len();
        let layer = Layer::new(Matrix::from_vec(1, d, w).unwrap(), vec![b]).unwrap();
        let mlp = Mlp::from_layers(vec![layer], Activation::Softplus).unwrap();
        DensityRatioModel::from_mlp(mlp, Head::LogRatio).unwrap()
    }

    #[test]
    fn midpoint_posterior_is_half() {
        let clf = two_mixture(2.0, 0.5);
        let x = Matrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        let lp = class_log_prob(&clf, 0, &x).unwrap();
        assert!((lp[0] - 0.5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn six_sigma_separation_saturates_posterior() {
        // Means 6 sigma apart; at a component mean the posterior exceeds 0.99.
        let clf = two_mixture(6.0, 1.0);
        let x = Matrix::from_rows(&[vec![-3.0, 0.0]]).unwrap();
        let lp = class_log_prob(&clf, 0, &x).unwrap();
        assert!(lp[0] > 0.99f64.ln(), "log posterior {}", lp[0]);
    }

    #[test]
    fn degenerate_weights_give_certain_posterior() {
        let clf = Classifier::analytic_bayes(
            vec![1.0, 0.0],
            vec![vec![0.0, 0.0], vec![5.0, 5.0]],
            1.0,
        )
        .unwrap();
        let x = Matrix::from_rows(&[vec![7.0, -3.0], vec![0.0, 0.0]]).unwrap();
        let lp = class_log_prob(&clf, 0, &x).unwrap();
        assert_eq!(lp, vec![0.0, 0.0]);
    }

    #[test]
    fn ratio_composition_identity() {
        // exp(log p(y=n|x)) * N == p(x|y=n) / p(x) for equal weights.
        let means = [vec![-1.0, 0.5], vec![1.0, -0.5], vec![0.0, 2.0]];
        let var = 0.7;
        let clf =
            Classifier::analytic_bayes(vec![1.0 / 3.0; 3], means.to_vec(), var).unwrap();
        let mut grid = Vec::new();
        for i in -2..=2 {
            for j in -2..=2 {
                grid.push(vec![i as f64 * 0.8, j as f64 * 0.8]);
            }
        }
        let x = Matrix::from_rows(&grid).unwrap();
        for n in 0..3 {
            let lp = class_log_prob(&clf, n, &x).unwrap();
            for (i, row) in x.iter_rows().enumerate() {
                let dens = |m: &[f64]| {
                    let sq: f64 = row.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum();
                    (-0.5 * sq / var).exp() / (2.0 * std::f64::consts::PI * var)
                };
                let p_x: f64 = means.iter().map(|m| dens(m) / 3.0).sum();
                let want = dens(&means[n]) / p_x;
                let got = lp[i].exp() * 3.0;
                assert!(
                    (got - want).abs() / want.abs().max(1e-12) < 1e-9,
                    "class {n} point {i}: got {got}, want {want}"
                );
            }
        }
    }

    #[test]
    fn phi_zero_matches_unconditional_drift_exactly() {
        let model = linear_log_ratio_model(vec![0.7, -0.2], 0.1);
        let clf = two_mixture(2.0, 0.5);
        let spec = ConditionalSpec::new(0, 0.0).unwrap();
        let x = Matrix::from_rows(&[vec![0.4, -1.0], vec![2.0, 0.0]]).unwrap();
        let cond = conditional_drift(&model, FDivergence::Kl, &clf, spec, &x).unwrap();
        let uncond = ModelDrift::new(&model, FDivergence::Kl)
            .unwrap()
            .evaluate(&x)
            .unwrap();
        assert_eq!(cond, uncond);

        // The drift is affine in phi, so it approaches the unconditional
        // drift continuously.
        let tiny = ConditionalSpec::new(0, 1e-9).unwrap();
        let near = conditional_drift(&model, FDivergence::Kl, &clf, tiny, &x).unwrap();
        for (a, b) in near.as_slice().iter().zip(uncond.as_slice()) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn linear_model_matches_closed_form_posterior_gradient() {
        // For an equal-covariance pair, grad log p(y=0|x) =
        // post_1(x) * (mu_0 - mu_1) / var, so the conditional drift is
        // w - phi * post_1(x) * (mu_0 - mu_1) / var.
        let w = [0.7, -0.2];
        let model = linear_log_ratio_model(w.to_vec(), 0.0);
        let (mu0, mu1, var) = ([-1.0, 0.0], [1.0, 0.0], 0.5);
        let clf =
            Classifier::analytic_bayes(vec![0.5, 0.5], vec![mu0.to_vec(), mu1.to_vec()], var)
                .unwrap();
        let phi = 0.1;
        let spec = ConditionalSpec::new(0, phi).unwrap();
        let xs = [vec![0.0, 0.0], vec![0.6, -0.3], vec![-1.2, 0.9]];
        let x = Matrix::from_rows(&xs).unwrap();
        let drift = conditional_drift(&model, FDivergence::Kl, &clf, spec, &x).unwrap();
        for (i, pt) in xs.iter().enumerate() {
            let score = |m: &[f64]| {
                let sq: f64 = pt.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum();
                -0.5 * sq / var
            };
            let (s0, s1) = (score(&mu0), score(&mu1));
            let post1 = (s1 - log_sum_exp(&[s0, s1])).exp();
            for a in 0..2 {
                let want = w[a] - phi * post1 * (mu0[a] - mu1[a]) / var;
                let got = drift.row(i)[a];
                assert!((got - want).abs() < 1e-12, "point {i} coord {a}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn conditional_drift_matches_finite_differences() {
        let model =
            DensityRatioModel::new_seeded(2, &[8, 8], Activation::Softplus, Head::LogRatio, 23)
                .unwrap();
        let clf = two_mixture(3.0, 0.7);
        let phi = 0.1;
        let spec = ConditionalSpec::new(1, phi).unwrap();
        let xs = [vec![0.3, -0.6], vec![-1.0, 1.0]];
        let x = Matrix::from_rows(&xs).unwrap();
        let drift = conditional_drift(&model, FDivergence::Kl, &clf, spec, &x).unwrap();

        let composed = |pt: &[f64]| -> f64 {
            let m = Matrix::from_rows(&[pt.to_vec()]).unwrap();
            let s = model.forward(&m).unwrap()[0];
            let lp = class_log_prob(&clf, 1, &m).unwrap()[0];
            s - phi * lp
        };
        let h = 1e-5;
        for (i, pt) in xs.iter().enumerate() {
            for a in 0..2 {
                let mut plus = pt.clone();
                let mut minus = pt.clone();
                plus[a] += h;
                minus[a] -= h;
                let fd = (composed(&plus) - composed(&minus)) / (2.0 * h);
                let got = drift.row(i)[a];
                let rel = (fd - got).abs() / fd.abs().max(1e-9);
                assert!(rel < 1e-4, "point {i} coord {a}: fd={fd} got={got}");
            }
        }
    }

    #[test]
    fn direct_ratio_head_is_rejected() {
        let layer = Layer::new(Matrix::zeros(1, 2), vec![0.0]).unwrap();
        let mlp = Mlp::from_layers(vec![layer], Activation::Softplus).unwrap();
        let model = DensityRatioModel::from_mlp(mlp, Head::DirectRatio).unwrap();
        let clf = two_mixture(2.0, 1.0);
        let spec = ConditionalSpec::new(0, 0.1).unwrap();
        assert!(matches!(
            ConditionalDrift::new(&model, FDivergence::Kl, &clf, spec),
            Err(Error::UnsupportedHead { .. })
        ));
    }

    #[test]
    fn non_kl_divergence_is_rejected() {
        let model = linear_log_ratio_model(vec![1.0, 0.0], 0.0);
        let clf = two_mixture(2.0, 1.0);
        let spec = ConditionalSpec::new(0, 0.1).unwrap();
        assert!(ConditionalDrift::new(&model, FDivergence::Js, &clf, spec).is_err());
    }

    #[test]
    fn phi_zero_sampling_reproduces_unconditional_exactly() {
        let model = linear_log_ratio_model(vec![0.4, 0.4], -0.2);
        let clf = two_mixture(4.0, 0.5);
        let prior = Prior::std_gaussian(2).unwrap();
        let cfg = FlowConfig::new(FDivergence::Kl, 0.05, 0.01, 10, 3).unwrap();
        let spec = ConditionalSpec::new(0, 0.0).unwrap();
        let cond = conditional_sample(&model, &clf, spec, &prior, &cfg, 50, 77).unwrap();
        let uncond = sample(&model, &prior, &cfg, 50, 77).unwrap();
        assert_eq!(cond.points, uncond.points);
    }

    #[test]
    fn degenerate_classifier_changes_nothing() {
        let model = linear_log_ratio_model(vec![0.4, -0.1], 0.0);
        let clf = Classifier::analytic_bayes(
            vec![1.0, 0.0],
            vec![vec![0.0, 0.0], vec![9.0, 9.0]],
            1.0,
        )
        .unwrap();
        let prior = Prior::std_gaussian(2).unwrap();
        let cfg = FlowConfig::new(FDivergence::Kl, 0.05, 0.01, 8, 0).unwrap();
        let spec = ConditionalSpec::new(0, 0.1).unwrap();
        let cond = conditional_sample(&model, &clf, spec, &prior, &cfg, 40, 13).unwrap();
        let uncond = sample(&model, &prior, &cfg, 40, 13).unwrap();
        assert_eq!(cond.points, uncond.points);
    }

    #[test]
    fn learned_softmax_sums_to_one_and_separates() {
        let mixture = TargetSpec::GaussianMixture {
            weights: vec![0.5, 0.5],
            means: vec![vec![-2.0, 0.0], vec![2.0, 0.0]],
            var: 0.25,
        };
        let clf = train_softmax_classifier(&mixture, &[16], 300, 64, 3e-3, 5).unwrap();

        // Posterior sums to 1 per sample.
        let x = Matrix::from_rows(&[vec![0.3, 0.1], vec![-1.5, 0.4], vec![2.2, -0.2]]).unwrap();
        for i in 0..x.rows() {
            let total: f64 = (0..2)
                .map(|n| class_log_prob(&clf, n, &x).unwrap()[i].exp())
                .sum();
            assert!((total - 1.0).abs() < 1e-9, "sum {total}");
        }

        // Confident and correct at the component means.
        let at_means = Matrix::from_rows(&[vec![-2.0, 0.0], vec![2.0, 0.0]]).unwrap();
        let lp0 = class_log_prob(&clf, 0, &at_means).unwrap();
        assert!(lp0[0] > 0.9f64.ln(), "class 0 at its mean: {}", lp0[0].exp());
        assert!(lp0[1] < 0.1f64.ln(), "class 0 at the other mean: {}", lp0[1].exp());

        // Input gradients of the learned posterior agree with finite
        // differences.
        let pt = vec![0.4, -0.1];
        let xm = Matrix::from_rows(std::slice::from_ref(&pt)).unwrap();
        let grad = class_log_prob_grad(&clf, 0, &xm).unwrap();
        let h = 1e-5;
        for a in 0..2 {
            let mut plus = pt.clone();
            let mut minus = pt.clone();
            plus[a] += h;
            minus[a] -= h;
            let lp = |p: &[f64]| {
                class_log_prob(&clf, 0, &Matrix::from_rows(&[p.to_vec()]).unwrap()).unwrap()[0]
            };
            let fd = (lp(&plus) - lp(&minus)) / (2.0 * h);
            let got = grad.row(0)[a];
            let rel = (fd - got).abs() / fd.abs().max(1e-9);
            assert!(rel < 1e-4, "coord {a}: fd={fd} got={got}");
        }
    }
}
