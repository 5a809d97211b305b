//! Browser bindings for the demo page in `www/`.

use wasm_bindgen::prelude::*;

use laminate::cohesive::{CohesiveLaw, LoadingProfile};
use laminate::discretization::{stress_field, Mesh};
use laminate::evolution::{
    run_evolution, InitialFields, LoadProfile, LoadProgram, Problem, TimePartition,
};
use laminate::materials::{
    check_regularity_condition, DamageDissipation, ElasticModulus, LayerMaterial, Materials,
};
use laminate::solver::SolverOptions;

fn js_err(e: laminate::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn law(family: &str, c: f64, k: f64) -> Result<CohesiveLaw, JsError> {
    let profile = match family {
        "parabolic" => LoadingProfile::parabolic_capped(c, k),
        "exponential" => LoadingProfile::exponential(c, k),
        other => return Err(JsError::new(&format!("unknown family {other:?}"))),
    };
    CohesiveLaw::quadratic_unloading(profile.map_err(js_err)?).map_err(js_err)
}

fn materials(a1: f64, a2: f64, b: f64) -> Result<Materials, JsError> {
    let layer = |a: f64| -> Result<LayerMaterial, JsError> {
        Ok(LayerMaterial {
            modulus: ElasticModulus::power(a, b).map_err(js_err)?,
            dissipation: DamageDissipation::new(0.5, 1.0).map_err(js_err)?,
        })
    };
    Ok([layer(a1)?, layer(a2)?])
}

/// Samples `[z, psi(z), phi(z, z_max)]` triples on `[0, 1.5 z_max]`, flattened.
#[wasm_bindgen]
pub fn cohesive_curve(
    family: &str,
    c: f64,
    k: f64,
    z_max: f64,
    samples: usize,
) -> Result<Vec<f64>, JsError> {
    let law = law(family, c, k)?;
    let samples = samples.max(2);
    let top = 1.5 * z_max.max(1e-6);
    let mut out = Vec::with_capacity(3 * samples);
    for i in 0..samples {
        let z = top * i as f64 / (samples - 1) as f64;
        out.extend([z, law.psi(z), law.phi(z, z.max(z_max))]);
    }
    Ok(out)
}

/// `min m/M - lambda L^2 / pi^2` for power-law layers.
#[wasm_bindgen]
pub fn regularity_margin(
    family: &str,
    c: f64,
    k: f64,
    a1: f64,
    a2: f64,
    b: f64,
    length: f64,
) -> Result<f64, JsError> {
    let budget =
        check_regularity_condition(&materials(a1, a2, b)?, &law(family, c, k)?, length, 256)
            .map_err(js_err)?;
    Ok(budget.margin)
}

/// Result of [`run_ramp`].
#[wasm_bindgen]
pub struct Evolution {
    times: Vec<f64>,
    energies: Vec<f64>,
    nodes: Vec<f64>,
    fields: Vec<f64>,
    stresses: Vec<f64>,
    all_converged: bool,
}

#[wasm_bindgen]
impl Evolution {
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }

    /// `[E, D, K, W]` per step, flattened.
    pub fn energies(&self) -> Vec<f64> {
        self.energies.clone()
    }

    pub fn nodes(&self) -> Vec<f64> {
        self.nodes.clone()
    }

    /// Final `[alpha1, alpha2, slip]` per node, flattened.
    pub fn fields(&self) -> Vec<f64> {
        self.fields.clone()
    }

    /// Final `sigma1 + sigma2` per element.
    pub fn stresses(&self) -> Vec<f64> {
        self.stresses.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn all_converged(&self) -> bool {
        self.all_converged
    }
}

/// Linear ramp `u_bar = rate t` on `[0, 1]`, unit bar, small central damage seed in layer 1.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn run_ramp(
    family: &str,
    c: f64,
    k: f64,
    a1: f64,
    a2: f64,
    rate: f64,
    n_elems: usize,
    n_steps: usize,
) -> Result<Evolution, JsError> {
    let mesh = Mesh::new(1.0, n_elems.clamp(2, 128)).map_err(js_err)?;
    let n = mesh.n_nodes();
    let nodes = mesh.nodes();
    let seed: Vec<f64> = nodes
        .iter()
        .map(|&x| {
            let r = (x - 0.5).abs() / 0.25;
            if r < 1.0 {
                0.3 * (0.5 * std::f64::consts::PI * r).cos().powi(2)
            } else {
                0.0
            }
        })
        .collect();
    let problem = Problem {
        mesh,
        materials: materials(a1, a2, 0.5)?,
        law: law(family, c, k)?,
        load: LoadProgram::new(LoadProfile::LinearRamp { rate, start: 0.0 }, 1.0)
            .map_err(js_err)?,
        partition: TimePartition::uniform(n_steps.clamp(1, 400), 1.0).map_err(js_err)?,
        solver: SolverOptions::default(),
        initial: InitialFields {
            u1: vec![0.0; n],
            u2: vec![0.0; n],
            alpha1: seed,
            alpha2: vec![0.0; n],
        },
        seed: 0,
    };
    let trace = run_evolution(&problem).map_err(js_err)?;
    let last = trace.states.last().expect("trace has the initial state");
    let slip = last.slip();
    Ok(Evolution {
        times: trace.records.iter().map(|r| r.t).collect(),
        energies: trace
            .records
            .iter()
            .flat_map(|r| [r.elastic, r.damage, r.cohesive, r.work])
            .collect(),
        fields: (0..n)
            .flat_map(|j| [last.alpha1[j], last.alpha2[j], slip[j]])
            .collect(),
        stresses: stress_field(&problem.mesh, last, &problem.materials)
            .into_iter()
            .map(|(a, b)| a + b)
            .collect(),
        nodes,
        all_converged: trace.records.iter().all(|r| r.converged),
    })
}
