//! The walkthrough from the repository README: sample a hard instance, solve
//! it exactly, and run two metered estimators against the closed-form truth.

use pprlab::estimators::{forward_push, mc_estimate, McConfig};
use pprlab::exact::exact_ppr;
use pprlab::instance::{build_instance, sample_sigma, InstanceParams};
use pprlab::oracle::{ArcOracle, Budget, InitialCoverage, QueryOracle};
use pprlab::util::trial_rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let p = InstanceParams::new(50, 8, 3, 0, 0.2)?;
    let sigma = sample_sigma(&p, &mut trial_rng(42, 0));
    let g = build_instance(&p, &sigma)?;
    let truth = exact_ppr(&g, p.s_label(), p.alpha, 1e-12)?;

    let mut oracle = ArcOracle::new(&g, Budget::queries(100_000), InitialCoverage::All, 7);
    let push = forward_push(&mut oracle, p.s_label(), p.alpha, 1e-4)?;
    let mc_cfg = McConfig { walks: 5_000, seed: 9 };
    let mc = mc_estimate(&mut oracle, p.s_label(), p.alpha, &mc_cfg)?;

    let x1 = p.x_label(sigma.sp[0]); // label of one heavy pool node
    let at = |m: &std::collections::BTreeMap<_, f64>| m.get(&x1).copied().unwrap_or(0.0);
    println!("π(x₁):  exact {:.6}", truth.get(x1));
    println!("        push  {:.6} (residual cap 1e-4)", at(&push.estimates));
    println!("        mc    {:.6} ({} walks)", at(&mc.estimate), mc_cfg.walks);
    println!("queries charged: {}", oracle.query_count());
    Ok(())
}
