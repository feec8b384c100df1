//! Standardized sentences: a small grammar for queries and trip commands,
//! and the response templates.
//!
//! ```text
//! get (aoi|road|person) with id <int> [.]
//! set agent with id <int> to <verb> to (aoi|poi) <int> at <hh>:<mm>
//!     {, and then <verb> to (aoi|poi) <int> at <hh>:<mm>} [.]
//! ```

use std::fmt;

use crate::error::{Error, Result};
use crate::model::{format_hhmm, AoiId, Destination, PersonId, PoiId, RoadId, TravelMode, Trip, SECONDS_PER_DAY};
use crate::snapshot::{AoiRuntime, PersonRuntime, RoadRuntime};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TripSpec {
    pub mode: TravelMode,
    pub end: Destination,
    /// Seconds after midnight.
    pub depart: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    GetAoi(AoiId),
    GetRoad(RoadId),
    GetPerson(PersonId),
    SetTrips { person: PersonId, trips: Vec<TripSpec> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Word(String),
    Int(u64),
    Colon,
    Comma,
    Period,
    Other(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    pos: usize,
    text: String,
}

fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(pos, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        if c.is_ascii_digit() || c.is_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&(_, d)) = chars.peek() {
                if d.is_alphanumeric() || d == '_' {
                    s.push(d);
                    chars.next();
                } else {
                    break;
                }
            }
            let tok = if s.chars().all(|d| d.is_ascii_digit()) {
                match s.parse() {
                    Ok(n) => Tok::Int(n),
                    Err(_) => Tok::Word(s.clone()),
                }
            } else {
                Tok::Word(s.to_lowercase())
            };
            out.push(Token { tok, pos, text: s });
            continue;
        }
        chars.next();
        let tok = match c {
            ':' => Tok::Colon,
            ',' => Tok::Comma,
            '.' => Tok::Period,
            other => Tok::Other(other),
        };
        out.push(Token {
            tok,
            pos,
            text: c.to_string(),
        });
    }
    out
}

struct Parser {
    toks: Vec<Token>,
    at: usize,
    end: usize,
}

impl Parser {
    fn fail<T>(&self, expected: &str) -> Result<T> {
        Err(match self.toks.get(self.at) {
            Some(t) => Error::Parse(format!(
                "unexpected token '{}' at position {}, expected {expected}",
                t.text, t.pos
            )),
            None => Error::Parse(format!("unexpected end of input at position {}, expected {expected}", self.end)),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|t| &t.tok)
    }

    fn word(&mut self, w: &str) -> Result<()> {
        match self.peek() {
            Some(Tok::Word(s)) if s == w => {
                self.at += 1;
                Ok(())
            }
            _ => self.fail(&format!("'{w}'")),
        }
    }

    fn one_of<T: Copy>(&mut self, options: &[(&str, T)]) -> Result<T> {
        if let Some(Tok::Word(s)) = self.peek() {
            if let Some(&(_, v)) = options.iter().find(|(w, _)| w == s) {
                self.at += 1;
                return Ok(v);
            }
        }
        let names: Vec<String> = options.iter().map(|(w, _)| format!("'{w}'")).collect();
        self.fail(&names.join(" or "))
    }

    fn int(&mut self) -> Result<u64> {
        match self.peek() {
            Some(&Tok::Int(n)) => {
                self.at += 1;
                Ok(n)
            }
            _ => self.fail("an integer"),
        }
    }

    fn punct(&mut self, p: Tok, name: &str) -> Result<()> {
        if self.peek() == Some(&p) {
            self.at += 1;
            Ok(())
        } else {
            self.fail(name)
        }
    }

    fn time(&mut self) -> Result<i64> {
        let start = self.at;
        let h = self.int()?;
        self.punct(Tok::Colon, "':'")?;
        let m = self.int()?;
        if h >= 24 || m >= 60 {
            self.at = start;
            return self.fail("a time of day HH:MM");
        }
        Ok((h * 3600 + m * 60) as i64)
    }

    fn leg(&mut self) -> Result<TripSpec> {
        let mode = self.one_of(&[("drive", TravelMode::Drive), ("walk", TravelMode::Walk), ("bike", TravelMode::Bike)])?;
        self.word("to")?;
        let kind = self.one_of(&[("aoi", true), ("poi", false)])?;
        let id = self.int()?;
        self.word("at")?;
        let depart = self.time()?;
        let end = if kind { Destination::Aoi(AoiId(id)) } else { Destination::Poi(PoiId(id)) };
        Ok(TripSpec { mode, end, depart })
    }

    fn finish(&mut self) -> Result<()> {
        if self.peek() == Some(&Tok::Period) {
            self.at += 1;
        }
        if self.at < self.toks.len() {
            return self.fail("end of sentence");
        }
        Ok(())
    }
}

pub fn parse_command(text: &str) -> Result<Command> {
    let mut p = Parser {
        toks: tokenize(text),
        at: 0,
        end: text.len(),
    };
    let verb = p.one_of(&[("get", true), ("set", false)])?;
    let cmd = if verb {
        let kind = p.one_of(&[("aoi", 0u8), ("road", 1), ("person", 2)])?;
        p.word("with")?;
        p.word("id")?;
        let id = p.int()?;
        match kind {
            0 => Command::GetAoi(AoiId(id)),
            1 => Command::GetRoad(RoadId(id)),
            _ => Command::GetPerson(PersonId(id)),
        }
    } else {
        p.word("agent")?;
        p.word("with")?;
        p.word("id")?;
        let person = PersonId(p.int()?);
        p.word("to")?;
        let mut trips = vec![p.leg()?];
        while p.peek() == Some(&Tok::Comma) {
            p.at += 1;
            p.word("and")?;
            p.word("then")?;
            trips.push(p.leg()?);
        }
        Command::SetTrips { person, trips }
    };
    p.finish()?;
    Ok(cmd)
}

fn dest_phrase(d: Destination) -> String {
    match d {
        Destination::Aoi(a) => format!("AOI {a}"),
        Destination::Poi(p) => format!("POI {p}"),
    }
}

impl fmt::Display for Command {
    /// The canonical sentence for this command.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::GetAoi(id) => write!(f, "Get AOI with ID {id}."),
            Command::GetRoad(id) => write!(f, "Get road with ID {id}."),
            Command::GetPerson(id) => write!(f, "Get person with ID {id}."),
            Command::SetTrips { person, trips } => {
                write!(f, "Set agent with ID {person} to ")?;
                for (i, t) in trips.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", and then ")?;
                    }
                    write!(f, "{} to {} at {}", t.mode.as_str(), dest_phrase(t.end), format_hhmm(t.depart))?;
                }
                f.write_str(".")
            }
        }
    }
}

/// What a command needs from the running simulation.
pub trait CityApi {
    fn get_aoi(&self, id: AoiId) -> Result<AoiRuntime>;
    fn get_road(&self, id: RoadId) -> Result<RoadRuntime>;
    fn get_person(&self, id: PersonId) -> Result<PersonRuntime>;
    fn set_trips(&self, id: PersonId, trips: Vec<Trip>) -> Result<()>;
    /// Whole days elapsed, used to anchor HH:MM times.
    fn current_day(&self) -> i64;
}

/// "10", "10 and 11", "10, 11 and 23".
pub fn join_with_and(items: &[String]) -> String {
    match items {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    }
}

fn plural(n: usize, word: &str) -> String {
    if n == 1 {
        format!("1 {word}")
    } else {
        format!("{n} {word}s")
    }
}

pub fn render_aoi(a: &AoiRuntime) -> String {
    let roads: Vec<String> = a.connected_roads.iter().map(|r| r.to_string()).collect();
    let connection = if roads.is_empty() {
        "is not connected to any road".to_string()
    } else {
        format!("is connected to {} {}", if roads.len() == 1 { "road" } else { "roads" }, join_with_and(&roads))
    };
    format!(
        "The AOI with ID {} has an area of {} square meters, a population of {}, the land use type is {}, contains {}, and {}.",
        a.id,
        a.area_m2.round() as i64,
        a.population,
        a.land_use.phrase(),
        plural(a.poi_count, "POI"),
        connection
    )
}

pub fn render_road(r: &RoadRuntime) -> String {
    format!(
        "The road with ID {} has a length of {} meters, {} and a speed limit of {:.1} m/s, carries {} and {}, has an average speed of {:.1} m/s, and its congestion level is {}.",
        r.id,
        r.length_m.round() as i64,
        plural(r.lane_count as usize, "lane"),
        r.speed_limit,
        plural(r.vehicles.len(), "vehicle"),
        plural(r.pedestrians.len(), "pedestrian"),
        r.average_speed,
        serde_json::to_value(r.congestion_level)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default()
    )
}

fn trip_phrase(t: &Trip) -> String {
    format!("{} to {} at {}", t.mode.as_str(), dest_phrase(t.end), format_hhmm(t.depart_time))
}

pub fn render_person(p: &PersonRuntime) -> String {
    let current = p
        .current_trip
        .as_ref()
        .map_or_else(|| "no trip in progress".to_string(), |t| format!("is on a trip to {}", trip_phrase(t)));
    format!(
        "The person with ID {} is at ({:.1}, {:.1}), moving at {:.1} m/s in direction ({:.2}, {:.2}), {}, and has {}.",
        p.id,
        p.coordinate.x,
        p.coordinate.y,
        p.speed,
        p.direction.x,
        p.direction.y,
        if p.current_trip.is_some() { current } else { format!("has {current}") },
        plural(p.pending_trips.len(), "pending trip")
    )
}

pub fn render_error(e: &Error) -> String {
    format!("Error: {}: {}.", e.code(), e.to_string().trim_end_matches('.'))
}

/// Runs a command against the simulation and renders the response sentence.
pub fn execute(cmd: &Command, api: &dyn CityApi) -> Result<String> {
    match cmd {
        Command::GetAoi(id) => api.get_aoi(*id).map(|a| render_aoi(&a)),
        Command::GetRoad(id) => api.get_road(*id).map(|r| render_road(&r)),
        Command::GetPerson(id) => api.get_person(*id).map(|p| render_person(&p)),
        Command::SetTrips { person, trips } => {
            let day = api.current_day() * SECONDS_PER_DAY;
            let trips = trips.iter().map(|t| Trip::new(t.end, day + t.depart, t.mode)).collect();
            api.set_trips(*person, trips).map(|_| "OK.".to_string())
        }
    }
}

/// Parse, execute and render; errors become "Error: CODE: message.".
pub fn respond(text: &str, api: &dyn CityApi) -> String {
    match parse_command(text).and_then(|c| execute(&c, api)) {
        Ok(s) => s,
        Err(e) => render_error(&e),
    }
}
