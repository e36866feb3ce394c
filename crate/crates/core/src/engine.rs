//! Deterministic discrete-event core: clock, priority event queue, and the
//! run loop advancing agents through one simulated day.
//!
//! A run is a pure function of `(config, seed)`. One ChaCha8 generator owned
//! by the run loop serves every stochastic draw in a fixed order: first the
//! infected are drawn (a partial Fisher-Yates over person indices), then
//! each decision consumes draws in the order activity → duration → place,
//! followed for collective activities by gathering size and invitee
//! drafting when the gathering assembles. Ties in the event queue break by
//! insertion sequence, so identical inputs replay identically bit for bit.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::aerosol::{AerosolState, Exposure};
use crate::behavior;
use crate::config::SimulationConfig;
use crate::history::{PersonExposure, Recorder, RunHistory};

/// What a queue entry does when it fires.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    /// An agent's current activity ends and it decides what to do next.
    /// Stale epochs (the agent was rescheduled meanwhile) are ignored.
    AgentWakeup { person: usize, epoch: u64 },
    /// A planned gathering assembles, drafting invitees.
    CollectiveStart(Gathering),
    /// End of the simulated day.
    DayEnd,
}

/// A collective event planned by an initiator, waiting to assemble.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gathering {
    pub initiator: usize,
    pub initiator_epoch: u64,
    pub model: usize,
    pub place: usize,
    pub duration: u32,
}

/// A scheduled wake-up. Queue order is `(fire_time, sequence)`, so events at
/// the same minute fire in insertion order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimEvent {
    pub fire_time: u32,
    pub sequence: u64,
    pub kind: EventKind,
}

impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap, we want earliest first
        (other.fire_time, other.sequence).cmp(&(self.fire_time, self.sequence))
    }
}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Time-ordered pending-event queue with stable tie-breaking.
#[derive(Default)]
pub struct EventQueue {
    heap: BinaryHeap<SimEvent>,
    next_sequence: u64,
}

impl EventQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert an event. Scheduling into the past is an engine bug.
    pub fn schedule(&mut self, now: u32, fire_time: u32, kind: EventKind) {
        assert!(
            fire_time >= now,
            "scheduled event at {fire_time} before current time {now}"
        );
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.heap.push(SimEvent {
            fire_time,
            sequence,
            kind,
        });
    }

    pub fn pop(&mut self) -> Option<SimEvent> {
        self.heap.pop()
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }
}

/// Simulation clock in minutes since midnight; never moves backwards.
#[derive(Debug, Clone, Copy)]
pub struct Clock {
    pub now: u32,
}

impl Clock {
    pub fn new(start: u32) -> Self {
        Clock { now: start }
    }

    pub fn advance_to(&mut self, time: u32) {
        assert!(time >= self.now, "clock regression: {} -> {}", self.now, time);
        self.now = time;
    }
}

struct PlaceRuntime {
    occupants: Vec<usize>,
    aerosol: AerosolState,
    lambda_a: f64,
    lambda_r: f64,
    volume: f64,
}

struct PersonRuntime {
    current_place: usize,
    current_model: usize,
    /// Current episode is the fallback activity; it ignores and does not
    /// advance the repetition counter.
    fallback: bool,
    episode_start: u32,
    episode_quanta: f64,
    /// Repetition counter already advanced for the current episode.
    episode_counted: bool,
    epoch: u64,
    counters: Vec<u32>,
    exposure: Exposure,
    infected: bool,
}

struct Sim<'a> {
    config: &'a SimulationConfig,
    clock: Clock,
    queue: EventQueue,
    rng: ChaCha8Rng,
    places: Vec<PlaceRuntime>,
    persons: Vec<PersonRuntime>,
    recorder: Recorder,
}

/// Simulate one day. Identical `(config, seed)` pairs yield bit-identical
/// histories.
pub fn run_day(config: &SimulationConfig, seed: u64) -> RunHistory {
    let mut sim = Sim::new(config, seed);
    sim.select_infected();
    sim.materialize();
    sim.run_loop();
    sim.finish(seed)
}

impl<'a> Sim<'a> {
    fn new(config: &'a SimulationConfig, seed: u64) -> Self {
        let day_start = config.options.day_start;
        let places = config
            .places
            .iter()
            .map(|place| PlaceRuntime {
                occupants: Vec::new(),
                aerosol: AerosolState::new(config.aerosol.co2_background, day_start),
                lambda_a: place.ventilation_natural,
                lambda_r: place.mechanical_rate(),
                volume: place.volume(),
            })
            .collect();
        let persons = config
            .people
            .iter()
            .map(|_| PersonRuntime {
                current_place: usize::MAX,
                current_model: usize::MAX,
                fallback: true,
                episode_start: day_start,
                episode_quanta: 0.0,
                episode_counted: false,
                epoch: 0,
                counters: vec![0; config.events.len()],
                exposure: Exposure::default(),
                infected: false,
            })
            .collect();
        let recorder = Recorder::new(
            config.places.iter().map(|p| p.name.clone()).collect(),
            config.people.iter().map(|p| p.name.clone()).collect(),
        );
        Sim {
            config,
            clock: Clock::new(day_start),
            queue: EventQueue::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            places,
            persons,
            recorder,
        }
    }

    /// Draw the infected uniformly without replacement; the first RNG use of
    /// a run.
    fn select_infected(&mut self) {
        let n = self.persons.len();
        let k = self.config.options.n_infected as usize;
        let mut indices: Vec<usize> = (0..n).collect();
        for i in 0..k {
            let j = self.rng.random_range(i..n);
            indices.swap(i, j);
            self.persons[indices[i]].infected = true;
        }
    }

    /// Put every agent in its start place at day start and schedule the
    /// first decisions. Day end is scheduled first so it outranks any
    /// same-minute wake-up.
    fn materialize(&mut self) {
        let day_start = self.config.options.day_start;
        let day_end = self.config.options.day_end;
        self.queue.schedule(day_start, day_end, EventKind::DayEnd);
        for person in 0..self.persons.len() {
            let place = self.config.start_place[person];
            let model = self
                .config
                .fallback_event_idx
                .expect("validated: fallback exists when people are present");
            self.persons[person].current_place = place;
            self.persons[person].current_model = model;
            self.places[place].occupants.push(person);
        }
        for place in 0..self.places.len() {
            self.refresh_context(place);
            self.snapshot_place(place, day_start);
        }
        for person in 0..self.persons.len() {
            self.schedule_wakeup(person, day_start);
        }
    }

    fn run_loop(&mut self) {
        while let Some(event) = self.queue.pop() {
            self.clock.advance_to(event.fire_time);
            match event.kind {
                EventKind::DayEnd => {
                    self.day_end();
                    break;
                }
                EventKind::AgentWakeup { person, epoch } => {
                    if self.persons[person].epoch == epoch {
                        self.decide(person);
                    }
                }
                EventKind::CollectiveStart(gathering) => self.assemble(gathering),
            }
        }
    }

    fn finish(self, seed: u64) -> RunHistory {
        let infected = self
            .persons
            .iter()
            .enumerate()
            .filter(|(_, p)| p.infected)
            .map(|(i, _)| self.config.people[i].name.clone())
            .collect();
        let exposure = self
            .persons
            .iter()
            .enumerate()
            .map(|(i, p)| PersonExposure {
                person: self.config.people[i].name.clone(),
                department: self.config.people[i].department.clone(),
                infected: p.infected,
                quanta: p.exposure.quanta,
                co2_ppm_minutes: p.exposure.co2_ppm_minutes,
                minutes: p.exposure.minutes,
            })
            .collect();
        RunHistory {
            config_digest: self.config.digest(),
            seed,
            infected,
            places: self.recorder.places,
            persons: self.recorder.persons,
            exposure,
        }
    }

    /// Advance a place's aerosol state to `now`, crediting every occupant's
    /// exposure ledger and running episode.
    fn advance_place(&mut self, place: usize, now: u32) {
        let rt = &mut self.places[place];
        if let Some(interval) =
            rt.aerosol
                .advance_to(now, rt.lambda_a, rt.lambda_r, rt.volume, &self.config.aerosol)
        {
            for &occupant in &rt.occupants {
                let person = &mut self.persons[occupant];
                person.exposure.credit(&interval);
                person.episode_quanta += interval.inhaled_per_person;
            }
        }
    }

    /// Recompute the occupancy context (N, N_i, mask) after a membership or
    /// activity change.
    fn refresh_context(&mut self, place: usize) {
        let rt = &self.places[place];
        let occupants = rt.occupants.len() as u32;
        let infected = rt.occupants.iter().filter(|&&q| self.persons[q].infected).count() as u32;
        let mask = rt
            .occupants
            .iter()
            .map(|&q| self.config.events[self.persons[q].current_model].mask_efficiency)
            .fold(0.0f64, f64::max);
        self.places[place].aerosol.set_context(occupants, infected, mask);
    }

    fn snapshot_place(&mut self, place: usize, now: u32) {
        let state = &self.places[place].aerosol;
        let (n, n_inf, co2, quanta) = (state.occupants, state.infected, state.co2, state.quanta);
        self.recorder.record_place(place, now, n, n_inf, co2, quanta);
    }

    /// Record the completed episode of `person`, unless it is zero-length.
    /// The person's place must already be advanced to `now`.
    fn snapshot_person(&mut self, person: usize, now: u32) {
        let p = &self.persons[person];
        if p.episode_start == now && p.episode_quanta == 0.0 {
            return;
        }
        let place_name = self.config.places[p.current_place].name.clone();
        let event_name = self.config.events[p.current_model].name.clone();
        let co2 = self.places[p.current_place].aerosol.co2;
        let quanta = p.episode_quanta;
        self.recorder
            .record_person(person, now, &place_name, &event_name, co2, quanta);
    }

    /// Advance the repetition counter for the episode that just ended.
    /// Fallback episodes and zero-length episodes do not count.
    fn finish_episode_counter(&mut self, person: usize, now: u32) {
        let p = &mut self.persons[person];
        if !p.episode_counted {
            p.episode_counted = true;
            if !p.fallback && now > p.episode_start {
                p.counters[p.current_model] += 1;
            }
        }
    }

    /// Move a person into `(place, model)` at `now`, closing the current
    /// episode: both places advance, exposure is credited, the episode
    /// snapshot is recorded, and occupancy transfers atomically.
    fn move_person(&mut self, person: usize, place: usize, model: usize, fallback: bool) {
        let now = self.clock.now;
        let from = self.persons[person].current_place;
        self.advance_place(from, now);
        self.snapshot_person(person, now);
        if from != place {
            self.advance_place(place, now);
            let rt = &mut self.places[from];
            let position = rt.occupants.iter().position(|&q| q == person).expect("occupant");
            rt.occupants.swap_remove(position);
        }
        {
            let p = &mut self.persons[person];
            p.current_place = place;
            p.current_model = model;
            p.fallback = fallback;
            p.episode_start = now;
            p.episode_quanta = 0.0;
            p.episode_counted = false;
        }
        if from != place {
            self.refresh_context(from);
            self.snapshot_place(from, now);
            self.places[place].occupants.push(person);
        }
        self.refresh_context(place);
        self.snapshot_place(place, now);
    }

    fn schedule_wakeup(&mut self, person: usize, fire_time: u32) {
        self.persons[person].epoch += 1;
        let epoch = self.persons[person].epoch;
        self.queue
            .schedule(self.clock.now, fire_time, EventKind::AgentWakeup { person, epoch });
    }

    /// Places that can host `model` for a person of `department` right now.
    fn feasible_places(&self, model: usize, department: &str) -> Vec<usize> {
        let activity = &self.config.events[model].activity;
        self.config
            .places
            .iter()
            .enumerate()
            .filter(|(idx, place)| {
                place.activity == *activity
                    && place.admits(department)
                    && (self.places[*idx].occupants.len() as u32) < place.capacity
            })
            .map(|(idx, _)| idx)
            .collect()
    }

    /// An agent's activity ended: close it out and pick what comes next.
    fn decide(&mut self, person: usize) {
        let now = self.clock.now;
        self.finish_episode_counter(person, now);
        let department = self.config.people[person].department.clone();
        let candidates = behavior::eligible_models(
            &self.config.events,
            &self.persons[person].counters,
            now,
            self.config.options.day_end,
            self.config.options.priority_alpha,
            |model| !self.feasible_places(model, &department).is_empty(),
        );
        let Some(chosen) = behavior::select_weighted(&candidates, &mut self.rng) else {
            self.fallback_move(person);
            return;
        };
        let model = &self.config.events[chosen.model];
        let duration = behavior::sample_duration(
            model,
            now,
            chosen.window_end,
            self.config.options.day_end,
            &mut self.rng,
        );
        let feasible = self.feasible_places(chosen.model, &department);
        let place = behavior::select_place(&feasible, &mut self.rng)
            .expect("eligible model has a feasible place");
        if model.collective {
            let epoch = self.persons[person].epoch;
            self.queue.schedule(
                now,
                now,
                EventKind::CollectiveStart(Gathering {
                    initiator: person,
                    initiator_epoch: epoch,
                    model: chosen.model,
                    place,
                    duration,
                }),
            );
        } else {
            self.move_person(person, place, chosen.model, false);
            self.schedule_wakeup(person, now + duration);
        }
    }

    /// Assemble a planned gathering: draft invitees out of interruptible
    /// activities and move everyone in at the same minute. All participants
    /// finish together.
    fn assemble(&mut self, gathering: Gathering) {
        let now = self.clock.now;
        let initiator = gathering.initiator;
        if self.persons[initiator].epoch != gathering.initiator_epoch {
            // the initiator was drafted into another gathering meanwhile
            return;
        }
        let place = gathering.place;
        let place_spec = &self.config.places[place];
        let already_inside = self.persons[initiator].current_place == place;
        if !already_inside && self.places[place].occupants.len() as u32 >= place_spec.capacity {
            // the room filled up between planning and assembly
            self.fallback_move(initiator);
            return;
        }

        let fallback_idx = self.config.fallback_event_idx;
        let rep_cap = self.config.events[gathering.model].repetitions_max;
        let available: Vec<usize> = (0..self.persons.len())
            .filter(|&q| {
                q != initiator
                    && Some(self.persons[q].current_model) == fallback_idx
                    && place_spec.admits(&self.config.people[q].department)
                    && rep_cap.is_none_or(|cap| self.persons[q].counters[gathering.model] < cap)
                    && !self.holds_out_for_mandatory(q, gathering.model, now)
            })
            .collect();
        let drafted = behavior::draft_invitees(place_spec.capacity, &available, &mut self.rng);

        self.move_person(initiator, place, gathering.model, false);
        let free = place_spec.capacity as usize - self.places[place].occupants.len();
        let invitees: Vec<usize> = drafted.into_iter().take(free).collect();
        for &invitee in &invitees {
            self.finish_episode_counter(invitee, now);
            self.move_person(invitee, place, gathering.model, false);
        }
        let end = now + gathering.duration;
        self.schedule_wakeup(initiator, end);
        for &invitee in &invitees {
            self.schedule_wakeup(invitee, end);
        }
    }

    /// A person with an unmet mandatory repetition whose window is open
    /// right now declines drafts into anything but that model's gatherings
    /// (nobody skips a still-pending lunch for somebody else's meeting).
    fn holds_out_for_mandatory(&self, person: usize, gathering_model: usize, now: u32) -> bool {
        let day_end = self.config.options.day_end;
        self.config.events.iter().enumerate().any(|(idx, model)| {
            idx != gathering_model
                && self.persons[person].counters[idx] < model.repetitions_min
                && behavior::open_window(model, now)
                    .is_some_and(|(_, end)| end.min(day_end) >= now + model.duration_min)
        })
    }

    /// Nothing is eligible: return to (or stay in) the department's work
    /// place doing the fallback activity until the next window opens.
    fn fallback_move(&mut self, person: usize) {
        let now = self.clock.now;
        let day_end = self.config.options.day_end;
        let fallback = self
            .config
            .fallback_event_idx
            .expect("validated: fallback exists when people are present");
        let department = &self.config.people[person].department;
        let activity = &self.config.events[fallback].activity;
        let current = self.persons[person].current_place;

        let mut candidates: Vec<usize> = self
            .config
            .places
            .iter()
            .enumerate()
            .filter(|(_, p)| p.activity == *activity && p.admits(department))
            .map(|(idx, _)| idx)
            .collect();
        candidates.sort_by_key(|&idx| {
            let n = self.config.places[idx].departments_allowed.len();
            (if n == 0 { usize::MAX } else { n }, idx)
        });
        let has_room = |sim: &Self, idx: usize| {
            idx == current
                || (sim.places[idx].occupants.len() as u32) < sim.config.places[idx].capacity
        };
        let target = candidates
            .iter()
            .copied()
            .find(|&idx| has_room(self, idx))
            .or_else(|| {
                // every work place is full: any admitted place with room
                (0..self.config.places.len())
                    .find(|&idx| self.config.places[idx].admits(department) && has_room(self, idx))
            })
            .unwrap_or_else(|| {
                panic!(
                    "no place available for person `{}` at {now}",
                    self.config.people[person].name
                )
            });

        // wake again when some model could become eligible
        let next_opportunity = self
            .config
            .events
            .iter()
            .enumerate()
            .filter(|(idx, model)| {
                model
                    .repetitions_max
                    .is_none_or(|cap| self.persons[person].counters[*idx] < cap)
            })
            .flat_map(|(_, model)| model.schedule.iter().map(|w| w.start))
            .filter(|&start| start > now)
            .min()
            .unwrap_or(day_end)
            .min(day_end);

        self.move_person(person, target, fallback, true);
        self.schedule_wakeup(person, next_opportunity);
    }

    /// Close the day: advance every place to day end, snapshot everything,
    /// and close every agent's final episode.
    fn day_end(&mut self) {
        let day_end = self.config.options.day_end;
        for place in 0..self.places.len() {
            self.advance_place(place, day_end);
        }
        for place in 0..self.places.len() {
            self.snapshot_place(place, day_end);
        }
        for person in 0..self.persons.len() {
            self.finish_episode_counter(person, day_end);
            self.snapshot_person(person, day_end);
        }
    }
}
