//! Drives path-bound vehicles with one of the reservation protocols.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::grid::{CellSpan, Fidelity, IntersectionGrid};
use super::reactive::{cruise, reactive_priority_step, stop_before, PathVehicle, PriorityTicket, ReactiveParams};
use super::timeslot::{timeslot_plan_step, track_profile, SpeedProfile, TimeslotParams};
use crate::error::{Error, Result};
use crate::sim::{Body, Command, FleetController, Vehicle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Reactive,
    Timeslot,
}

#[derive(Debug, Clone)]
struct Track {
    spans: Vec<CellSpan>,
    ticket: Option<PriorityTicket>,
    profile: Option<SpeedProfile>,
}

#[derive(Debug, Clone)]
pub struct ReservationFleet {
    kind: BaselineKind,
    grid: IntersectionGrid,
    reactive: ReactiveParams,
    timeslot: TimeslotParams,
    tracks: BTreeMap<usize, Track>,
}

fn path_state(v: &Vehicle) -> Result<(f64, f64)> {
    match v.body {
        Body::OnPath { s, v } => Ok((s, v)),
        Body::Free { .. } => Err(Error::InvalidInput(format!("vehicle {} is not path-bound", v.id))),
    }
}

impl ReservationFleet {
    pub fn new(kind: BaselineKind, fidelity: Fidelity, vehicles: &[Vehicle]) -> Result<Self> {
        let grid = IntersectionGrid::new(fidelity);
        let mut tracks = BTreeMap::new();
        for v in vehicles {
            path_state(v)?;
            let spans = grid.path_spans(&v.path, &v.shape);
            tracks.insert(v.id, Track { spans, ticket: None, profile: None });
        }
        Ok(Self { kind, grid, reactive: ReactiveParams::default(), timeslot: TimeslotParams::default(), tracks })
    }

    pub fn grid(&self) -> &IntersectionGrid {
        &self.grid
    }

    fn view<'a>(&'a self, v: &Vehicle) -> Result<PathVehicle<'a>> {
        let (s, speed) = path_state(v)?;
        let track = self.tracks.get(&v.id).ok_or_else(|| Error::InvalidInput(format!("unknown vehicle {}", v.id)))?;
        Ok(PathVehicle { id: v.id, s, v: speed, v_ref: v.v_ref, spans: &track.spans })
    }

    /// Hands out tickets to vehicles whose first remaining cell is within
    /// `reach` and returns the contenders in priority order, followed by the
    /// others by id.
    fn order(&mut self, t: f64, vehicles: &[Vehicle], reach: impl Fn(&PathVehicle) -> f64) -> Result<Vec<usize>> {
        let mut tickets = Vec::new();
        for (k, v) in vehicles.iter().enumerate() {
            let pv = self.view(v)?;
            let first = pv.remaining().next().map(|sp| sp.s_in);
            let r = reach(&pv);
            let new_ticket = match first {
                Some(s_in) if s_in - pv.s <= r => Some(PriorityTicket {
                    vehicle: v.id,
                    arrival: t + (s_in - pv.s).max(0.0) / pv.v.max(0.1),
                }),
                _ => None,
            };
            let track = self.tracks.get_mut(&v.id).expect("viewed");
            if track.ticket.is_none() {
                track.ticket = new_ticket;
            }
            tickets.push((track.ticket, k));
        }
        tickets.sort_by(|a, b| match (a.0, b.0) {
            (Some(x), Some(y)) => x.cmp(&y),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => vehicles[a.1].id.cmp(&vehicles[b.1].id),
        });
        Ok(tickets.into_iter().map(|(_, k)| k).collect())
    }
}

impl FleetController for ReservationFleet {
    fn commands(&mut self, t: f64, vehicles: &[Vehicle]) -> Result<Vec<Command>> {
        let mut out = vec![Command::Accel(0.0); vehicles.len()];
        match self.kind {
            BaselineKind::Reactive => {
                let params = self.reactive;
                for k in self.order(t, vehicles, |pv| pv.lookahead(&params))? {
                    let pv = self.view(&vehicles[k])?;
                    let spans = pv.spans.to_vec();
                    let pv = PathVehicle { spans: &spans, ..pv };
                    out[k] = Command::Accel(reactive_priority_step(&pv, &mut self.grid, &params).accel);
                }
            }
            BaselineKind::Timeslot => {
                let params = self.timeslot;
                let reach = params.planning_distance;
                for k in self.order(t, vehicles, |_| reach)? {
                    let v = &vehicles[k];
                    let pv = self.view(v)?;
                    let spans = pv.spans.to_vec();
                    let pv = PathVehicle { spans: &spans, ..pv };
                    let track = &self.tracks[&v.id];
                    if track.profile.is_none() && track.ticket.is_some() {
                        let plan = timeslot_plan_step(&pv, t, &mut self.grid, &params);
                        self.tracks.get_mut(&v.id).expect("present").profile = plan;
                    }
                    let accel = match (&self.tracks[&v.id].profile, pv.remaining().next()) {
                        (Some(p), _) => track_profile(p, t, pv.s, pv.v, &params),
                        (None, Some(first)) if first.s_in - pv.s <= reach => {
                            stop_before(pv.s, pv.v, pv.v_ref, first.s_in - self.reactive.stop_margin, &self.reactive).accel
                        }
                        (None, _) => cruise(pv.v, pv.v_ref, &self.reactive).accel,
                    };
                    out[k] = Command::Accel(accel);
                }
            }
        }
        Ok(out)
    }

    fn vehicle_finished(&mut self, id: usize) {
        self.grid.forget(id);
        self.tracks.remove(&id);
    }
}
