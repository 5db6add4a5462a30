//! Bound states of a reflectionless potential `A sech²(x)`.
//!
//! With `h = 1`, `A = s(s+1)` has exactly `s` bound states with
//! `κ = s, s-1, …, 1`.

use ppg_qpr::scsa;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for a in [2.0, 6.0, 12.0] {
        let s = scsa::sampled_on_grid(15.0, 0.05, |x| a / x.cosh().powi(2));
        let op = scsa::build_operator(&s, 1.0)?;
        let spec = scsa::solve_negative_spectrum(&op, 1.0, s.dt())?;
        let kappas: Vec<String> = spec.kappas.iter().map(|k| format!("{k:.5}")).collect();
        println!("A = {a:>4}: {} bound states, κ = [{}]", spec.count(), kappas.join(", "));

        let st = scsa::components_from_spectrum(&spec, spec.count())?;
        let peak = st.reconstruction.iter().copied().fold(0.0, f64::max);
        println!("          reconstructed peak {peak:.4} (true {a})");
    }
    Ok(())
}
