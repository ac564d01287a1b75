//! Excited-state population under a pulse pair, and how dephasing sets the
//! visibility of molecules and quantum dots.

use std::f64::consts::{FRAC_PI_2, PI};

use smqc::coherence::{
    dephasing_time, excited_population, visibility, DephasingEnvironment, DipoleGeometry, DEFAULT_INTER_PULSE_DELAY,
    DEFAULT_MOLECULE_T2, DEFAULT_QD_T2,
};

fn main() -> smqc::Result<()> {
    let v_mol = visibility(DEFAULT_INTER_PULSE_DELAY, DEFAULT_MOLECULE_T2)?;
    let v_qd = visibility(DEFAULT_INTER_PULSE_DELAY, DEFAULT_QD_T2)?;
    println!("visibility: molecule {v_mol:.4}, quantum dot {v_qd:.3e}");

    println!("{:>8} {:>10} {:>10}", "phase", "molecule", "qd");
    for i in 0..=8 {
        let phi = -PI + 2.0 * PI * i as f64 / 8.0;
        println!(
            "{phi:>8.3} {:>10.4} {:>10.4}",
            excited_population(FRAC_PI_2, phi, v_mol)?,
            excited_population(FRAC_PI_2, phi, v_qd)?
        );
    }

    let noise = 1e9;
    let single = dephasing_time(&DephasingEnvironment::new(DipoleGeometry::SingleAxis, noise)?);
    let iso = dephasing_time(&DephasingEnvironment::new(DipoleGeometry::IsotropicThreeAxis, noise)?);
    println!("same noise, T2*: single-axis {single:.3e} s, isotropic {iso:.3e} s (ratio {:.1})", single / iso);
    Ok(())
}
