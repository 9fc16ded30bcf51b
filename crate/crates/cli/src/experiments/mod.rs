mod brute;
mod channels;
mod lattice;
mod maser;
mod measure;
mod qwalk;
mod thermo;
mod toy;
mod weak;

use std::fmt;

use serde_json::Value;

use crate::config::SchemaError;
use crate::report::{Context, Report};

#[derive(Debug)]
pub enum RunError {
    /// Bad configuration; exit code 2.
    Schema(SchemaError),
    /// A computation failed outright; exit code 1.
    Compute(anyhow::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Schema(e) => write!(f, "invalid config {e}"),
            RunError::Compute(e) => write!(f, "computation failed: {e:#}"),
        }
    }
}

impl From<SchemaError> for RunError {
    fn from(e: SchemaError) -> Self {
        RunError::Schema(e)
    }
}

impl From<riqs::Error> for RunError {
    fn from(e: riqs::Error) -> Self {
        use riqs::Error::*;
        match e {
            InvalidParameter(_) | DimensionMismatch { .. } | NotSquare { .. } | NotHermitian { .. } | InvalidState(_) | NegativeProbability(_) => {
                RunError::Schema(SchemaError::new("params", e.to_string()))
            }
            other => RunError::Compute(other.into()),
        }
    }
}

pub type RunResult = Result<Report, RunError>;

pub struct Entry {
    pub name: &'static str,
    pub summary: &'static str,
    pub anchor: &'static str,
    run: fn(&Value, &Context) -> RunResult,
}

/// Alphabetized catalog; one entry per acceptance criterion.
pub const CATALOG: [Entry; 12] = [
    Entry {
        name: "channel_properties",
        summary: "CPTP checks on every constructed channel, full-tensor brute force against iteration, bit-identical replay",
        anchor: "reduced dynamics as a partial trace of the joint unitary evolution",
        run: channels::run,
    },
    Entry {
        name: "kbeam_fluxes",
        summary: "K-beam stationary energy fluxes against closed forms, work and entropy identities, kinetic coefficients",
        anchor: "non-equilibrium steady states of several beams, deterministic and random order",
        run: thermo::kbeam,
    },
    Entry {
        name: "lattice_ldp",
        summary: "Wannier ladder walk: exact moments, CLT, large deviations, fluctuation symmetry, Einstein relation",
        anchor: "Theorem on diffusion of the lattice electron (drift, diffusion, CLT, LDP)",
        run: lattice::run,
    },
    Entry {
        name: "maser_sectors",
        summary: "One-atom maser: Rabi resonances, sector invariant states, weight conservation, peripheral spectrum",
        anchor: "Theorem on the cavity invariant states and the peripheral eigenvalue lemma",
        run: maser::run,
    },
    Entry {
        name: "measure_correlations",
        summary: "Indirect measurements: joint law against brute force, correlation decay, frequencies, large deviations",
        anchor: "Theorem on the decay of outcome correlations and the explicit spin-spin step operator",
        run: measure::run,
    },
    Entry {
        name: "qwalk_moments",
        summary: "Random-coin quantum walk: unitarity, transfer-matrix moments against Monte Carlo, ballistic vs diffusive",
        anchor: "Theorem on the characteristic function of quantum walks in random coin environments",
        run: qwalk::run,
    },
    Entry {
        name: "random_ri",
        summary: "Random interaction times and temperatures: convergence to the shared state and to the averaged state",
        anchor: "Theorems on random repeated interactions and the random toy-model exercise",
        run: toy::random_ri,
    },
    Entry {
        name: "thermo_identities",
        summary: "Work and entropy production of the spin model: exchange, full dipole, random temperatures",
        anchor: "energy and entropy balance of repeated interactions, spin examples",
        run: thermo::identities,
    },
    Entry {
        name: "toy_convergence",
        summary: "Exponential approach to the invariant state at rate sqrt(e0)",
        anchor: "toy-model exercise on ideal repeated interactions, eigenvalue e0",
        run: toy::convergence,
    },
    Entry {
        name: "toy_rdm",
        summary: "Numerical reduced dynamics map against the closed-form Kraus channel on a parameter grid",
        anchor: "toy-model reduced dynamics in Kraus form",
        run: toy::rdm,
    },
    Entry {
        name: "toy_spectrum",
        summary: "Spectrum {1, e+, e-, e0} and the Gibbs invariant state at the renormalized temperature",
        anchor: "toy-model exercise on ideal repeated interactions",
        run: toy::spectrum,
    },
    Entry {
        name: "weak_limits",
        summary: "Weak-coupling and critical scaling orders, Lindblad semigroup properties, zero-temperature limit",
        anchor: "weak coupling and Chernoff scaling limits of repeated interactions",
        run: weak::run,
    },
];

pub fn find(name: &str) -> Option<&'static Entry> {
    CATALOG.iter().find(|e| e.name == name)
}

pub fn run(entry: &Entry, params: &Value, ctx: &Context) -> RunResult {
    (entry.run)(params, ctx)
}
