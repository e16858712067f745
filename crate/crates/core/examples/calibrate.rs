//! Regenerates the measurements behind `constants.rs`: scans (chi, omega)
//! pairs, buckets the assembled |h~| by bound class, and prints the worst
//! observed ratio per class.  Freeze constants at measured max x 1.5.

use plocal::characters::MultChar;
use plocal::dualweight::{dual_weight, BoundClass};
use plocal::scalar::R;

fn main() {
    let mut worst: [(R, String); 4] = std::array::from_fn(|_| (0.0, String::new()));
    let plan: &[(u64, u32)] = &[(3, 4), (5, 4), (7, 3), (13, 2)];
    for &(p, nmax) in plan {
        let q = p as R;
        for n in 1..=nmax {
            let cap_q = q.powi(n as i32);
            for chi in MultChar::all_primitive(p, n).unwrap() {
                let mut omegas = vec![
                    MultChar::trivial(p),
                    MultChar::new(p, 0, 0, 0.37, 0.0).unwrap(),
                    MultChar::new(p, 0, 0, 0.91, 0.0).unwrap(),
                ];
                for c in 1..=n + 1 {
                    omegas.extend(MultChar::all_primitive(p, c).unwrap());
                }
                for omega in &omegas {
                    let rep = dual_weight(&chi, omega).unwrap();
                    let v = rep.value().norm();
                    let (idx, ratio) = match rep.bound_class {
                        BoundClass::UnramifiedO1 => (0, v),
                        BoundClass::GenericOverQ => (1, v * cap_q),
                        BoundClass::Atypical => {
                            let na = rep.atypical.as_ref().map_or(0, |c| c.n_alpha) as R;
                            let odd = if n % 2 == 1 { q.sqrt() } else { 1.0 };
                            if na == 0.0 {
                                println!(
                                    "atypical with N_alpha = 0: chi={} omega={} |h~|={v:.3e}",
                                    rep.chi, rep.omega
                                );
                                continue;
                            }
                            (2, v * cap_q / (na * odd))
                        }
                        BoundClass::Zero => (3, v),
                    };
                    if ratio > worst[idx].0 {
                        worst[idx] = (ratio, format!("chi={} omega={}", rep.chi, rep.omega));
                    }
                }
            }
        }
        println!("done p={p}");
    }
    for (name, (r, at)) in ["unramified |h~|", "generic |h~|*Q", "atypical |h~|*Q/(N*q^?)", "zero |h~|"]
        .iter()
        .zip(&worst)
    {
        println!("{name:26} max = {r:.9e}   at {at}");
    }
}
