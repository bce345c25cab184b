//! Compares reverse-mode gradients of a full Transolver loss with central
//! finite differences.

use pncl::data::GridField;
use pncl::diffcore::{finite_difference_grad, gradient_discrepancy};
use pncl::physics::{sample_loss, LossConfig, LossForm};
use pncl::transolver::{TransolverConfig, TransolverModel};

fn main() -> anyhow::Result<()> {
    let mut model = TransolverModel::new(TransolverConfig::new(2, 4, 16, 4)?, 7)?;
    model.params_mut().perturb(0.3, 11)?;
    let k = GridField::from_fn(8, 8, |x, y| 1.0 + 0.5 * (3.0 * x + 2.0 * y).sin())?;
    let q = GridField::constant(8, 8, 1.0)?;

    for form in [LossForm::Energy, LossForm::Strong] {
        let cfg = LossConfig { form, ..LossConfig::default() };
        let loss = |m: &TransolverModel| m.loss_and_grad(&k, |g, out| sample_loss(g, &cfg, &k, &q, out, None));
        let (value, analytic) = loss(&model)?;
        let numeric = finite_difference_grad(
            |p| {
                let mut probe = model.clone();
                *probe.params_mut() = p.clone();
                loss(&probe).map(|r| r.0)
            },
            model.params(),
            1e-6,
        )?;
        println!("{form:?}: loss {value:+.5e}, discrepancy {:.2e}", gradient_discrepancy(&analytic, &numeric)?);
    }
    Ok(())
}
