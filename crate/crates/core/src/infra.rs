//! Heuristic topology for utility networks (power, water, telecom): AOIs
//! are demand vertices, aggregated level by level into supply clusters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Polyline};
use crate::model::{AoiId, LandUse, MapBundle};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfraConfig {
    /// Demand per resident, by land use.
    pub coefficients: BTreeMap<LandUse, f64>,
    pub cluster_radius: f64,
    /// Total number of levels including the AOI level.
    pub levels: u32,
}

impl Default for InfraConfig {
    fn default() -> Self {
        Self {
            coefficients: BTreeMap::from([
                (LandUse::Residential, 1.0),
                (LandUse::Commercial, 2.0),
                (LandUse::Industrial, 3.0),
                (LandUse::PublicService, 1.5),
                (LandUse::Other, 0.5),
            ]),
            cluster_radius: 500.0,
            levels: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfraVertex {
    pub id: usize,
    pub coordinate: Point,
    pub level: u32,
    pub aoi_id: AoiId,
    pub demand: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfraEdge {
    pub vertices: (usize, usize),
    pub geometry: Polyline,
    pub level: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InfraNetwork {
    pub vertices: Vec<InfraVertex>,
    pub edges: Vec<InfraEdge>,
}

impl InfraNetwork {
    pub fn level_demand(&self, level: u32) -> f64 {
        self.vertices
            .iter()
            .filter(|v| v.level == level)
            .map(|v| v.demand)
            .sum()
    }

    pub fn max_level(&self) -> u32 {
        self.vertices.iter().map(|v| v.level).max().unwrap_or(0)
    }
}

pub fn build_infrastructure_network(bundle: &MapBundle, config: &InfraConfig) -> Result<InfraNetwork> {
    if !(config.cluster_radius > 0.0) {
        return Err(Error::BadConfig(format!(
            "cluster_radius must be positive, got {}",
            config.cluster_radius
        )));
    }
    if config.levels == 0 {
        return Err(Error::BadConfig("levels must be positive".into()));
    }

    let mut net = InfraNetwork::default();
    let mut aois: Vec<_> = bundle.aois.iter().collect();
    aois.sort_by_key(|a| a.id);
    for aoi in aois {
        let coeff = config.coefficients.get(&aoi.land_use).copied().unwrap_or(0.0);
        let id = net.vertices.len();
        net.vertices.push(InfraVertex {
            id,
            coordinate: aoi.boundary.centroid(),
            level: 0,
            aoi_id: aoi.id,
            demand: aoi.population as f64 * coeff,
        });
    }

    let mut current: Vec<usize> = (0..net.vertices.len()).collect();
    for level in 1..config.levels {
        if current.len() <= 1 {
            break;
        }
        // seeds in descending demand, ties by vertex id
        let mut order = current.clone();
        order.sort_by(|&a, &b| {
            net.vertices[b]
                .demand
                .total_cmp(&net.vertices[a].demand)
                .then(a.cmp(&b))
        });
        let mut assigned = vec![false; net.vertices.len()];
        let mut next = Vec::new();
        for &seed in &order {
            if assigned[seed] {
                continue;
            }
            let seed_pt = net.vertices[seed].coordinate;
            let members: Vec<usize> = order
                .iter()
                .copied()
                .filter(|&v| {
                    !assigned[v] && net.vertices[v].coordinate.distance(&seed_pt) <= config.cluster_radius
                })
                .collect();
            for &m in &members {
                assigned[m] = true;
            }
            let total: f64 = members.iter().map(|&m| net.vertices[m].demand).sum();
            let center = if total > 0.0 {
                let (sx, sy) = members.iter().fold((0.0, 0.0), |(sx, sy), &m| {
                    let v = &net.vertices[m];
                    (sx + v.coordinate.x * v.demand, sy + v.coordinate.y * v.demand)
                });
                Point::new(sx / total, sy / total)
            } else {
                let n = members.len() as f64;
                let (sx, sy) = members.iter().fold((0.0, 0.0), |(sx, sy), &m| {
                    (sx + net.vertices[m].coordinate.x, sy + net.vertices[m].coordinate.y)
                });
                Point::new(sx / n, sy / n)
            };
            let parent = net.vertices.len();
            net.vertices.push(InfraVertex {
                id: parent,
                coordinate: center,
                level,
                aoi_id: net.vertices[seed].aoi_id,
                demand: total,
            });
            for &m in &members {
                net.edges.push(InfraEdge {
                    vertices: (m, parent),
                    geometry: Polyline::new(vec![net.vertices[m].coordinate, center]),
                    level: level - 1,
                });
            }
            next.push(parent);
        }
        current = next;
    }
    Ok(net)
}
