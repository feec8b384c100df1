//! Urban knowledge graph: typed relations over AOIs, POIs, regions, brands
//! and category levels, built from geometry and attributes.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::collinear_overlap;
use crate::index::SpatialIndex;
use crate::model::{AoiId, MapBundle, PersonId, PoiId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Aoi,
    Poi,
    Region,
    Brand,
    Cate1,
    Cate2,
    Cate3,
}

impl EntityKind {
    pub const ALL: [EntityKind; 7] = [
        EntityKind::Aoi,
        EntityKind::Poi,
        EntityKind::Region,
        EntityKind::Brand,
        EntityKind::Cate1,
        EntityKind::Cate2,
        EntityKind::Cate3,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EntityKind::Aoi => "aoi",
            EntityKind::Poi => "poi",
            EntityKind::Region => "region",
            EntityKind::Brand => "brand",
            EntityKind::Cate1 => "cate1",
            EntityKind::Cate2 => "cate2",
            EntityKind::Cate3 => "cate3",
        }
    }
}

impl FromStr for EntityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        EntityKind::ALL
            .into_iter()
            .find(|k| k.as_str() == lower)
            .ok_or_else(|| Error::UnknownEntity(s.to_string()))
    }
}

/// Numeric ids sort numerically and before names.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EntityId {
    Num(u64),
    Name(String),
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntityId::Num(n) => write!(f, "{n}"),
            EntityId::Name(s) => f.write_str(s),
        }
    }
}

impl Serialize for EntityId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            EntityId::Num(n) => s.serialize_u64(*n),
            EntityId::Name(n) => s.serialize_str(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Entity {
    pub kind: EntityKind,
    pub id: EntityId,
}

impl Entity {
    pub fn aoi(id: AoiId) -> Self {
        Self {
            kind: EntityKind::Aoi,
            id: EntityId::Num(id.0),
        }
    }

    pub fn poi(id: PoiId) -> Self {
        Self {
            kind: EntityKind::Poi,
            id: EntityId::Num(id.0),
        }
    }

    pub fn named(kind: EntityKind, name: impl Into<String>) -> Self {
        Self {
            kind,
            id: EntityId::Name(name.into()),
        }
    }

    /// Entity from a kind and a textual id; AOI and POI ids must be integers.
    pub fn parse(kind: &str, id: &str) -> Result<Self> {
        let kind: EntityKind = kind.parse()?;
        let id = match kind {
            EntityKind::Aoi | EntityKind::Poi => EntityId::Num(
                id.parse()
                    .map_err(|_| Error::UnknownEntity(format!("{}:{id}", kind.as_str())))?,
            ),
            _ => EntityId::Name(id.to_string()),
        };
        Ok(Self { kind, id })
    }
}

impl fmt::Display for Entity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.as_str(), self.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    BorderBy,
    NearBy,
    LocateAt,
    BelongTo,
    BrandOf,
    Cate1Of,
    Cate2Of,
    Cate3Of,
    Competitive,
    CoCheckin,
    SimilarFunc,
    ProvideService,
}

impl Relation {
    pub const ALL: [Relation; 12] = [
        Relation::BorderBy,
        Relation::NearBy,
        Relation::LocateAt,
        Relation::BelongTo,
        Relation::BrandOf,
        Relation::Cate1Of,
        Relation::Cate2Of,
        Relation::Cate3Of,
        Relation::Competitive,
        Relation::CoCheckin,
        Relation::SimilarFunc,
        Relation::ProvideService,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Relation::BorderBy => "borderBy",
            Relation::NearBy => "nearBy",
            Relation::LocateAt => "locateAt",
            Relation::BelongTo => "belongTo",
            Relation::BrandOf => "brandOf",
            Relation::Cate1Of => "cate1Of",
            Relation::Cate2Of => "cate2Of",
            Relation::Cate3Of => "cate3Of",
            Relation::Competitive => "competitive",
            Relation::CoCheckin => "coCheckin",
            Relation::SimilarFunc => "similarFunc",
            Relation::ProvideService => "provideService",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Relation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Relation::ALL
            .into_iter()
            .find(|r| r.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::UnknownRelation(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dir {
    Out,
    In,
}

/// Parses `rel`, `rel^-1` or `rel⁻¹` (the latter two follow edges backwards).
pub fn parse_hop(s: &str) -> Result<(Relation, Dir)> {
    let s = s.trim();
    for suffix in ["^-1", "⁻¹", "~"] {
        if let Some(base) = s.strip_suffix(suffix) {
            return Ok((base.parse()?, Dir::In));
        }
    }
    Ok((s.parse()?, Dir::Out))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: Entity,
    pub relation: Relation,
    pub tail: Entity,
}

#[derive(Debug, Clone)]
pub struct KgConfig {
    pub near_threshold_m: f64,
    pub cocheckin_min: usize,
    /// Collinearity tolerance when testing for shared AOI boundary.
    pub border_tolerance_m: f64,
}

impl Default for KgConfig {
    fn default() -> Self {
        Self {
            near_threshold_m: 500.0,
            cocheckin_min: 2,
            border_tolerance_m: 1e-6,
        }
    }
}

/// One POI visit by a person on a simulated day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CheckIn {
    pub person: PersonId,
    pub day: i64,
    pub poi: PoiId,
}

#[derive(Debug, Default)]
pub struct KnowledgeGraph {
    triples: BTreeSet<Triple>,
    entities: BTreeSet<Entity>,
    out: HashMap<(Entity, Relation), BTreeSet<Entity>>,
    inc: HashMap<(Entity, Relation), BTreeSet<Entity>>,
}

impl KnowledgeGraph {
    fn add_entity(&mut self, e: Entity) {
        self.entities.insert(e);
    }

    fn add(&mut self, head: Entity, relation: Relation, tail: Entity) {
        self.entities.insert(head.clone());
        self.entities.insert(tail.clone());
        self.out.entry((head.clone(), relation)).or_default().insert(tail.clone());
        self.inc.entry((tail.clone(), relation)).or_default().insert(head.clone());
        self.triples.insert(Triple { head, relation, tail });
    }

    fn add_both(&mut self, a: Entity, relation: Relation, b: Entity) {
        self.add(a.clone(), relation, b.clone());
        self.add(b, relation, a);
    }

    pub fn triples(&self) -> impl Iterator<Item = &Triple> {
        self.triples.iter()
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    pub fn contains(&self, e: &Entity) -> bool {
        self.entities.contains(e)
    }

    pub fn has(&self, head: &Entity, relation: Relation, tail: &Entity) -> bool {
        self.out.get(&(head.clone(), relation)).is_some_and(|s| s.contains(tail))
    }

    pub fn count(&self, relation: Relation) -> usize {
        self.triples.iter().filter(|t| t.relation == relation).count()
    }

    /// One-hop neighbours, in entity order.
    pub fn query_relation(&self, entity: &Entity, relation: Relation, dir: Dir) -> Result<Vec<Entity>> {
        if !self.contains(entity) {
            return Err(Error::UnknownEntity(entity.to_string()));
        }
        let table = match dir {
            Dir::Out => &self.out,
            Dir::In => &self.inc,
        };
        Ok(table
            .get(&(entity.clone(), relation))
            .map(|s| s.iter().cloned().collect())
            .unwrap_or_default())
    }

    /// Composition of hops, de-duplicated at every stage.
    pub fn query_path(&self, entity: &Entity, hops: &[(Relation, Dir)]) -> Result<Vec<Entity>> {
        if !self.contains(entity) {
            return Err(Error::UnknownEntity(entity.to_string()));
        }
        let mut frontier: BTreeSet<Entity> = BTreeSet::from([entity.clone()]);
        for &(rel, dir) in hops {
            let mut next = BTreeSet::new();
            for e in &frontier {
                next.extend(self.query_relation(e, rel, dir)?);
            }
            frontier = next;
        }
        Ok(frontier.into_iter().collect())
    }

    /// One triple per line: `head_kind:head_id relation tail_kind:tail_id`.
    pub fn export(&self) -> String {
        let mut s = String::new();
        for t in &self.triples {
            s.push_str(&escape_entity(&t.head));
            s.push(' ');
            s.push_str(t.relation.as_str());
            s.push(' ');
            s.push_str(&escape_entity(&t.tail));
            s.push('\n');
        }
        s
    }
}

fn escape_entity(e: &Entity) -> String {
    let id = e.id.to_string().replace('%', "%25").replace(' ', "%20");
    format!("{}:{id}", e.kind.as_str())
}

/// District of an AOI: its own `district` attribute, else the map's.
fn district_of(bundle: &MapBundle, aoi: &crate::model::Aoi) -> Option<String> {
    aoi.extra
        .get("district")
        .and_then(|v| v.as_str())
        .map(str::to_string)
        .or_else(|| bundle.metadata.district.clone())
}

/// Whether two AOI boundaries share a segment of positive length.
pub fn aois_share_border(a: &crate::model::Aoi, b: &crate::model::Aoi, tol: f64) -> bool {
    let mut total = 0.0;
    for (p, q) in a.boundary.edges() {
        for (r, s) in b.boundary.edges() {
            total += collinear_overlap(p, q, r, s, tol);
        }
    }
    total > tol
}

pub fn build_kg(bundle: &MapBundle, checkins: Option<&[CheckIn]>, config: &KgConfig) -> KnowledgeGraph {
    let mut kg = KnowledgeGraph::default();
    let index = SpatialIndex::build(bundle);
    let aoi_pos: HashMap<AoiId, usize> = bundle.aois.iter().enumerate().map(|(i, a)| (a.id, i)).collect();
    let centroids: Vec<_> = bundle.aois.iter().map(|a| a.boundary.centroid()).collect();

    for a in &bundle.aois {
        kg.add_entity(Entity::aoi(a.id));
    }
    let mut adjacent: BTreeSet<(AoiId, AoiId)> = BTreeSet::new();
    for (i, a) in bundle.aois.iter().enumerate() {
        let bb = a.boundary.bbox().expand(config.border_tolerance_m);
        for other in index.aois_in_box(bb.min, bb.max) {
            let j = aoi_pos[&other];
            if j <= i {
                continue;
            }
            let b = &bundle.aois[j];
            if aois_share_border(a, b, config.border_tolerance_m) {
                kg.add_both(Entity::aoi(a.id), Relation::BorderBy, Entity::aoi(b.id));
                adjacent.insert((a.id.min(b.id), a.id.max(b.id)));
            }
        }
    }
    let mut near: BTreeSet<(AoiId, AoiId)> = BTreeSet::new();
    let t = config.near_threshold_m;
    for (i, a) in bundle.aois.iter().enumerate() {
        let c = centroids[i];
        let bb = crate::geometry::BBox {
            min: c,
            max: c,
        }
        .expand(t);
        // candidate AOIs by bbox, exact test on centroids
        for other in index.aois_in_box(bb.min, bb.max) {
            let j = aoi_pos[&other];
            if j <= i {
                continue;
            }
            let b = &bundle.aois[j];
            let key = (a.id.min(b.id), a.id.max(b.id));
            if c.distance(&centroids[j]) <= t && !adjacent.contains(&key) {
                kg.add_both(Entity::aoi(a.id), Relation::NearBy, Entity::aoi(b.id));
                near.insert(key);
            }
        }
    }
    for a in &bundle.aois {
        if let Some(d) = district_of(bundle, a) {
            kg.add(Entity::aoi(a.id), Relation::BelongTo, Entity::named(EntityKind::Region, d));
        }
    }

    let mut by_aoi: BTreeMap<AoiId, Vec<&crate::model::Poi>> = BTreeMap::new();
    for p in &bundle.pois {
        let e = Entity::poi(p.id);
        kg.add_entity(e.clone());
        if let Some(a) = p.aoi_id {
            kg.add(e.clone(), Relation::LocateAt, Entity::aoi(a));
            by_aoi.entry(a).or_default().push(p);
        }
        if let Some(b) = p.brand.as_deref().filter(|b| !b.is_empty()) {
            kg.add(Entity::named(EntityKind::Brand, b), Relation::BrandOf, e.clone());
        }
        if p.category.is_well_formed() {
            let levels = [
                (EntityKind::Cate1, Relation::Cate1Of),
                (EntityKind::Cate2, Relation::Cate2Of),
                (EntityKind::Cate3, Relation::Cate3Of),
            ];
            for (level, (kind, rel)) in levels.into_iter().enumerate() {
                kg.add(Entity::named(kind, p.category.prefix(level + 1)), rel, e.clone());
            }
            kg.add(e.clone(), Relation::ProvideService, Entity::named(EntityKind::Cate3, p.category.0.clone()));
        }
    }

    for pois in by_aoi.values() {
        for (i, p) in pois.iter().enumerate() {
            for q in &pois[i + 1..] {
                if p.category.is_well_formed() && p.category.prefix(2) == q.category.prefix(2) {
                    kg.add_both(Entity::poi(p.id), Relation::SimilarFunc, Entity::poi(q.id));
                }
            }
        }
    }
    for &(a, b) in adjacent.iter().chain(near.iter()) {
        let (Some(pa), Some(pb)) = (by_aoi.get(&a), by_aoi.get(&b)) else { continue };
        for p in pa {
            for q in pb {
                if p.category.is_well_formed() && p.category == q.category {
                    kg.add_both(Entity::poi(p.id), Relation::Competitive, Entity::poi(q.id));
                }
            }
        }
    }

    if let Some(log) = checkins {
        let mut visits: BTreeMap<(PersonId, i64), BTreeSet<PoiId>> = BTreeMap::new();
        for c in log {
            visits.entry((c.person, c.day)).or_default().insert(c.poi);
        }
        let mut pair_people: BTreeMap<(PoiId, PoiId), BTreeSet<PersonId>> = BTreeMap::new();
        for ((person, _), pois) in &visits {
            let v: Vec<PoiId> = pois.iter().copied().collect();
            for (i, &p) in v.iter().enumerate() {
                for &q in &v[i + 1..] {
                    pair_people.entry((p, q)).or_default().insert(*person);
                }
            }
        }
        for ((p, q), people) in pair_people {
            if people.len() >= config.cocheckin_min {
                kg.add_both(Entity::poi(p), Relation::CoCheckin, Entity::poi(q));
            }
        }
    }
    kg
}
