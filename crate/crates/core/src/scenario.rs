//! Multi-cell contamination environment and received pilot synthesis.
//!
//! The received pilot of the user of interest in slot `n` is
//! `y = h x + (sum of same-pilot foreign channels) x + z`. Contamination is
//! either drawn as an aggregate Gaussian that is independent across slots
//! (idealized) or produced by explicit Clarke channels of hopping users in
//! `L - 1` neighbouring cells.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::ClarkeChannel;
use crate::error::{Error, Result};
use crate::pilots::{make_pilot_book, HopAssignment, HopSchedule, PilotBook};
use crate::seed::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ContaminationMode {
    #[default]
    Idealized,
    Explicit,
}

impl std::str::FromStr for ContaminationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "idealized" => Ok(Self::Idealized),
            "explicit" => Ok(Self::Explicit),
            other => Err(Error::invalid("mode", format!("expected idealized|explicit, got `{other}`"))),
        }
    }
}

impl std::fmt::Display for ContaminationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Idealized => "idealized",
            Self::Explicit => "explicit",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellTopology {
    pub cells: usize,
    pub users: usize,
    pub mode: ContaminationMode,
    /// Total contamination power, averaged over time.
    pub sigma_c2: f64,
    /// Noise variance per complex pilot entry.
    pub sigma_n2: f64,
}

impl CellTopology {
    pub fn validate(&self) -> Result<()> {
        if self.cells == 0 {
            return Err(Error::invalid("L", "need at least one cell"));
        }
        if self.users == 0 {
            return Err(Error::invalid("K", "need at least one user per cell"));
        }
        if !(self.sigma_c2 >= 0.0) || !self.sigma_c2.is_finite() {
            return Err(Error::invalid("sigma_c2", format!("must be finite and >= 0, got {}", self.sigma_c2)));
        }
        if !(self.sigma_n2 >= 0.0) || !self.sigma_n2.is_finite() {
            return Err(Error::invalid("sigma_n2", format!("must be finite and >= 0, got {}", self.sigma_n2)));
        }
        if self.mode == ContaminationMode::Explicit && self.cells < 2 && self.sigma_c2 > 0.0 {
            return Err(Error::invalid("L", "explicit contamination needs at least two cells"));
        }
        Ok(())
    }

    /// Power carried by each neighbouring cell's contaminator.
    pub fn per_cell_power(&self) -> f64 {
        if self.cells < 2 {
            0.0
        } else {
            self.sigma_c2 / (self.cells - 1) as f64
        }
    }
}

/// Contamination power for a signal-to-interference ratio in dB, with unit signal power.
pub fn sir_to_sigma_c(sir_db: f64) -> f64 {
    10f64.powf(-sir_db / 10.0)
}

pub fn sigma_c_to_sir(sigma_c2: f64) -> f64 {
    -10.0 * sigma_c2.log10()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotObservation {
    pub n: u64,
    pub y: Vec<Complex64>,
    /// Index of the pilot the user of interest sent.
    pub pilot: usize,
    pub h_true: Complex64,
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// Writes `y = (h + sum(contaminators)) x + z` into `y`.
pub fn fill_received<R: Rng + ?Sized>(
    y: &mut [Complex64],
    h: Complex64,
    contaminators: &[Complex64],
    x: &[Complex64],
    sigma_n2: f64,
    rng: &mut R,
) {
    debug_assert_eq!(y.len(), x.len());
    let gain = h + contaminators.iter().sum::<Complex64>();
    if sigma_n2 > 0.0 {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = gain * xi + complex_gaussian(rng, sigma_n2);
        }
    } else {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = gain * xi;
        }
    }
}

pub fn build_slot_observation<R: Rng + ?Sized>(
    n: u64,
    pilot: usize,
    h: Complex64,
    contaminators: &[Complex64],
    x: &[Complex64],
    sigma_n2: f64,
    rng: &mut R,
) -> SlotObservation {
    let mut y = vec![Complex64::new(0.0, 0.0); x.len()];
    fill_received(&mut y, h, contaminators, x, sigma_n2, rng);
    SlotObservation { n, y, pilot, h_true: h }
}

/// Aggregate contamination coefficient, circularly symmetric Gaussian with variance `sigma_c2`.
pub fn idealized_contaminator<R: Rng + ?Sized>(rng: &mut R, sigma_c2: f64) -> Complex64 {
    if sigma_c2 == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    complex_gaussian(rng, sigma_c2)
}

/// Clarke channels of every user in the `L - 1` neighbouring cells, as seen
/// from the base station of interest.
#[derive(Debug, Clone)]
pub struct ForeignCells {
    /// `channels[cell - 1][user]`
    channels: Vec<Vec<ClarkeChannel>>,
    amplitude: f64,
}

impl ForeignCells {
    pub fn new(
        topology: &CellTopology,
        n_scatterers: usize,
        f_d: f64,
        master_seed: u64,
        realization: u64,
    ) -> Result<Self> {
        let mut channels = Vec::with_capacity(topology.cells.saturating_sub(1));
        for cell in 1..topology.cells {
            let mut users = Vec::with_capacity(topology.users);
            for user in 0..topology.users {
                let mut rng = stream_rng(
                    master_seed,
                    Stream::ForeignChannel,
                    &[realization, cell as u64, user as u64],
                );
                users.push(ClarkeChannel::new(&mut rng, n_scatterers, f_d)?);
            }
            channels.push(users);
        }
        Ok(Self {
            channels,
            amplitude: topology.per_cell_power().sqrt(),
        })
    }

    pub fn neighbour_count(&self) -> usize {
        self.channels.len()
    }

    /// Scaled channel of the user holding `pilot` in each neighbouring cell.
    /// `assignments[i]` is the pilot assignment of neighbour cell `i + 1`.
    pub fn contaminators(
        &self,
        assignments: &[HopAssignment],
        pilot: usize,
        t: f64,
        out: &mut Vec<Complex64>,
    ) -> Result<()> {
        out.clear();
        if assignments.len() != self.channels.len() {
            return Err(Error::invalid(
                "assignments",
                format!("expected {} neighbour cells, got {}", self.channels.len(), assignments.len()),
            ));
        }
        for (users, assignment) in self.channels.iter().zip(assignments) {
            let user = assignment
                .user_of(pilot)
                .ok_or_else(|| Error::invalid("pilot", format!("index {pilot} out of range")))?;
            out.push(users[user].sample(t) * self.amplitude);
        }
        Ok(())
    }
}

/// Everything needed to synthesize one realization's slot stream.
#[derive(Debug, Clone)]
pub struct ScenarioParams {
    pub topology: CellTopology,
    pub tau: usize,
    pub n_scatterers: usize,
    /// Doppler shift shared by all users, Hz.
    pub f_d: f64,
    /// Time between pilots, s.
    pub t_s: f64,
    pub hopping: bool,
}

enum Contamination {
    Idealized(Box<ChaCha8Rng>),
    Explicit {
        cells: ForeignCells,
        scratch: Vec<HopAssignment>,
    },
}

/// Sequential generator of slot observations for one realization.
pub struct SlotStream<'a> {
    params: &'a ScenarioParams,
    book: &'a PilotBook,
    user: ClarkeChannel,
    schedule: HopSchedule,
    noise: ChaCha8Rng,
    contamination: Contamination,
    contaminators: Vec<Complex64>,
    next_slot: u64,
}

impl<'a> SlotStream<'a> {
    pub fn new(
        params: &'a ScenarioParams,
        book: &'a PilotBook,
        master_seed: u64,
        realization: u64,
    ) -> Result<Self> {
        params.topology.validate()?;
        if book.len() != params.topology.users || book.tau() != params.tau {
            return Err(Error::invalid(
                "pilot book",
                format!(
                    "book is {}x{}, topology wants tau={} K={}",
                    book.tau(),
                    book.len(),
                    params.tau,
                    params.topology.users
                ),
            ));
        }
        let mut user_rng = stream_rng(master_seed, Stream::UserChannel, &[realization]);
        let user = ClarkeChannel::new(&mut user_rng, params.n_scatterers, params.f_d)?;
        let contamination = match params.topology.mode {
            ContaminationMode::Idealized => Contamination::Idealized(Box::new(stream_rng(
                master_seed,
                Stream::Contamination,
                &[realization],
            ))),
            ContaminationMode::Explicit => Contamination::Explicit {
                cells: ForeignCells::new(
                    &params.topology,
                    params.n_scatterers,
                    params.f_d,
                    master_seed,
                    realization,
                )?,
                scratch: Vec::new(),
            },
        };
        Ok(Self {
            params,
            book,
            user,
            schedule: HopSchedule {
                master_seed,
                realization,
                k: params.topology.users,
                enabled: params.hopping,
            },
            noise: stream_rng(master_seed, Stream::Noise, &[realization]),
            contamination,
            contaminators: Vec::with_capacity(params.topology.cells),
            next_slot: 0,
        })
    }

    pub fn user_channel(&self) -> &ClarkeChannel {
        &self.user
    }

    pub fn empty_observation(&self) -> SlotObservation {
        SlotObservation {
            n: 0,
            y: vec![Complex64::new(0.0, 0.0); self.params.tau],
            pilot: 0,
            h_true: Complex64::new(0.0, 0.0),
        }
    }

    /// Overwrites `obs` with the next slot. Returns the contaminators used.
    pub fn next_into(&mut self, obs: &mut SlotObservation) -> Result<&[Complex64]> {
        let n = self.next_slot;
        self.next_slot += 1;
        let t = n as f64 * self.params.t_s;
        let own = self.schedule.assignment(0, n);
        let pilot = own.perm[0];
        let h = self.user.sample(t);

        match &mut self.contamination {
            Contamination::Idealized(rng) => {
                self.contaminators.clear();
                if self.params.topology.sigma_c2 > 0.0 {
                    self.contaminators
                        .push(idealized_contaminator(rng, self.params.topology.sigma_c2));
                }
            }
            Contamination::Explicit { cells, scratch } => {
                scratch.clear();
                scratch.extend((1..self.params.topology.cells).map(|c| self.schedule.assignment(c, n)));
                cells.contaminators(scratch, pilot, t, &mut self.contaminators)?;
            }
        }

        obs.y.resize(self.params.tau, Complex64::new(0.0, 0.0));
        fill_received(
            &mut obs.y,
            h,
            &self.contaminators,
            self.book.pilot(pilot),
            self.params.topology.sigma_n2,
            &mut self.noise,
        );
        obs.n = n;
        obs.pilot = pilot;
        obs.h_true = h;
        Ok(&self.contaminators)
    }
}

/// Convenience: builds the pilot book the topology implies.
pub fn pilot_book_for(params: &ScenarioParams) -> Result<PilotBook> {
    make_pilot_book(params.tau, params.topology.users)
}
