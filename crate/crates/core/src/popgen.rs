//! Synthetic population: homes, workplaces, wages and daily schedules drawn
//! from a seeded generator.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::model::{
    AoiId, Destination, LandUse, MapBundle, Money, Person, PersonId, TravelMode, Trip, SECONDS_PER_DAY,
};

#[derive(Debug, Clone)]
pub struct PopGenConfig {
    pub n_persons: usize,
    pub seed: u64,
    pub first_id: u64,
    /// Number of consecutive days of schedule to generate.
    pub days: u32,
    pub depart_mean: i64,
    pub depart_sd: f64,
    pub depart_min: i64,
    pub depart_max: i64,
    pub work_duration: i64,
    pub leisure_prob: f64,
    pub leisure_duration: i64,
    pub walk_max_m: f64,
    pub bike_max_m: f64,
    /// Relative spread of wages around the enterprise average.
    pub wage_spread: f64,
    pub opening_balance: Money,
}

impl Default for PopGenConfig {
    fn default() -> Self {
        Self {
            n_persons: 1000,
            seed: 0,
            first_id: 1,
            days: 1,
            depart_mean: 8 * 3600,
            depart_sd: 1800.0,
            depart_min: 5 * 3600,
            depart_max: 11 * 3600,
            work_duration: 9 * 3600,
            leisure_prob: 0.3,
            leisure_duration: 2 * 3600,
            walk_max_m: 1000.0,
            bike_max_m: 3000.0,
            wage_spread: 0.2,
            opening_balance: 100_000,
        }
    }
}

impl PopGenConfig {
    fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.leisure_prob) {
            return Err(Error::BadConfig(format!("leisure_prob {} outside [0, 1]", self.leisure_prob)));
        }
        if !(0.0..1.0).contains(&self.wage_spread) {
            return Err(Error::BadConfig(format!("wage_spread {} outside [0, 1)", self.wage_spread)));
        }
        if !(self.depart_sd > 0.0 && self.depart_min <= self.depart_max) {
            return Err(Error::BadConfig("bad departure window".into()));
        }
        if self.walk_max_m > self.bike_max_m {
            return Err(Error::BadConfig("walk_max_m exceeds bike_max_m".into()));
        }
        Ok(())
    }

    pub fn mode_for(&self, distance: f64) -> TravelMode {
        if distance < self.walk_max_m {
            TravelMode::Walk
        } else if distance < self.bike_max_m {
            TravelMode::Bike
        } else {
            TravelMode::Drive
        }
    }
}

pub fn generate_population(bundle: &MapBundle, config: &PopGenConfig) -> Result<Vec<Person>> {
    config.check()?;
    let residential: Vec<usize> = bundle
        .aois
        .iter()
        .enumerate()
        .filter(|(_, a)| a.land_use == LandUse::Residential)
        .map(|(i, _)| i)
        .collect();
    if residential.is_empty() {
        return Err(Error::NoResidential);
    }
    if config.n_persons == 0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let pop_weights: Vec<u64> = residential.iter().map(|&i| bundle.aois[i].population).collect();
    let homes = if pop_weights.iter().any(|&w| w > 0) {
        WeightedIndex::new(&pop_weights).ok()
    } else {
        None
    };

    // (aoi index, enterprise index) weighted by head count
    let jobs: Vec<(usize, usize)> = bundle
        .aois
        .iter()
        .enumerate()
        .flat_map(|(i, a)| (0..a.enterprises.len()).map(move |e| (i, e)))
        .filter(|&(i, e)| bundle.aois[i].enterprises[e].employee_count > 0)
        .collect();
    let job_pick = if jobs.is_empty() {
        None
    } else {
        Some(
            WeightedIndex::new(jobs.iter().map(|&(i, e)| bundle.aois[i].enterprises[e].employee_count))
                .map_err(|e| Error::BadConfig(e.to_string()))?,
        )
    };

    let priced: Vec<usize> = bundle
        .pois
        .iter()
        .enumerate()
        .filter(|(_, p)| {
            p.aoi_id
                .and_then(|a| bundle.aoi(a))
                .and_then(|a| a.consumption.get(p.category.cate1()))
                .is_some_and(|&m| m > 0)
        })
        .map(|(i, _)| i)
        .collect();
    let centroids: Vec<Point> = bundle.aois.iter().map(|a| a.boundary.centroid()).collect();
    let depart_dist = Normal::new(config.depart_mean as f64, config.depart_sd).map_err(|e| Error::BadConfig(e.to_string()))?;

    let mut persons = Vec::with_capacity(config.n_persons);
    for k in 0..config.n_persons {
        let home = match &homes {
            Some(w) => residential[w.sample(&mut rng)],
            None => residential[rng.random_range(0..residential.len())],
        };
        let mut person = Person::new(PersonId(config.first_id + k as u64), bundle.aois[home].id);
        person.balance = config.opening_balance;
        let Some(pick) = &job_pick else {
            persons.push(person);
            continue;
        };
        let (work, ent) = jobs[pick.sample(&mut rng)];
        let avg = bundle.aois[work].enterprises[ent].average_wage as f64;
        let factor = rng.random_range(1.0 - config.wage_spread..=1.0 + config.wage_spread);
        person.wage = (avg * factor).round() as Money;
        person.workplace = Some(bundle.aois[work].id);
        person.persona.insert("occupation".into(), bundle.aois[work].enterprises[ent].category.clone());

        let home_at = centroids[home];
        let work_at = centroids[work];
        let commute = config.mode_for(home_at.distance(&work_at));
        for day in 0..config.days as i64 {
            let base = day * SECONDS_PER_DAY;
            let depart = loop {
                let t = depart_dist.sample(&mut rng).round() as i64;
                if (config.depart_min..=config.depart_max).contains(&t) {
                    break t;
                }
            };
            person.trips.push(Trip::new(Destination::Aoi(bundle.aois[work].id), base + depart, commute));
            let leave = base + depart + config.work_duration;
            if !priced.is_empty() && rng.random_bool(config.leisure_prob) {
                let poi = &bundle.pois[priced[rng.random_range(0..priced.len())]];
                person.trips.push(Trip::new(
                    Destination::Poi(poi.id),
                    leave,
                    config.mode_for(work_at.distance(&poi.coordinate)),
                ));
                person.trips.push(Trip::new(
                    Destination::Aoi(bundle.aois[home].id),
                    leave + config.leisure_duration,
                    config.mode_for(poi.coordinate.distance(&home_at)),
                ));
            } else {
                person.trips.push(Trip::new(Destination::Aoi(bundle.aois[home].id), leave, commute));
            }
        }
        persons.push(person);
    }
    Ok(persons)
}

/// Writes generated persons into the bundle and stretches its horizon to
/// cover the generated days.
pub fn install_population(bundle: &mut MapBundle, persons: Vec<Person>, days: u32) {
    bundle.persons = persons;
    bundle.metadata.horizon_days = bundle.metadata.horizon_days.max(days);
}

/// Home AOI ids of a population, for quick census checks.
pub fn homes(persons: &[Person]) -> Vec<AoiId> {
    persons.iter().map(|p| p.home).collect()
}
