//! Money and messages: a double-entry ledger driven by POI visits, wages and
//! interest, and next-step message delivery.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::model::{AoiId, Money, PersonId};

pub const MAX_CONTENT_BYTES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Account {
    Person(PersonId),
    /// The enterprise at `index` within an AOI's enterprise list.
    Enterprise(AoiId, u32),
    Government,
    Bank,
}

impl fmt::Display for Account {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Account::Person(p) => write!(f, "person:{p}"),
            Account::Enterprise(a, i) => write!(f, "enterprise:{a}:{i}"),
            Account::Government => f.write_str("GOVERNMENT"),
            Account::Bank => f.write_str("BANK"),
        }
    }
}

impl FromStr for Account {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("bad account '{s}'"));
        match s {
            "GOVERNMENT" => return Ok(Account::Government),
            "BANK" => return Ok(Account::Bank),
            _ => {}
        }
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["person", id] => Ok(Account::Person(PersonId(id.parse().map_err(|_| bad())?))),
            ["enterprise", aoi, i] => Ok(Account::Enterprise(
                AoiId(aoi.parse().map_err(|_| bad())?),
                i.parse().map_err(|_| bad())?,
            )),
            _ => Err(bad()),
        }
    }
}

impl Serialize for Account {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Account {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryKind {
    Consumption,
    Wage,
    Tax,
    Interest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub step: u64,
    pub debit: Account,
    pub credit: Account,
    pub amount: Money,
    pub kind: EntryKind,
}

/// A rate held as parts per million so every split is integer arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Rate(u32);

impl Rate {
    pub const ZERO: Rate = Rate(0);

    pub fn from_f64(r: f64) -> Result<Self> {
        if !(r.is_finite() && r >= 0.0 && r <= 1.0) {
            return Err(Error::BadConfig(format!("rate {r} outside [0, 1]")));
        }
        Ok(Rate((r * 1e6).round() as u32))
    }

    pub fn ppm(&self) -> u32 {
        self.0
    }

    pub fn as_f64(&self) -> f64 {
        self.0 as f64 / 1e6
    }

    /// floor(amount * rate), exact for any i64 amount.
    pub fn apply(&self, amount: Money) -> Money {
        (amount as i128 * self.0 as i128).div_euclid(1_000_000) as Money
    }
}

#[derive(Debug, Clone, Default)]
pub struct Ledger {
    balances: BTreeMap<Account, Money>,
    entries: Vec<LedgerEntry>,
    initial_total: i128,
}

impl Ledger {
    pub fn new(opening: impl IntoIterator<Item = (Account, Money)>) -> Self {
        let mut balances = BTreeMap::new();
        for (a, m) in opening {
            *balances.entry(a).or_insert(0) += m;
        }
        balances.entry(Account::Government).or_insert(0);
        balances.entry(Account::Bank).or_insert(0);
        let initial_total = balances.values().map(|&m| m as i128).sum();
        Self {
            balances,
            entries: Vec::new(),
            initial_total,
        }
    }

    pub fn balance(&self, account: Account) -> Money {
        self.balances.get(&account).copied().unwrap_or(0)
    }

    pub fn balances(&self) -> &BTreeMap<Account, Money> {
        &self.balances
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn total(&self) -> i128 {
        self.balances.values().map(|&m| m as i128).sum()
    }

    pub fn initial_total(&self) -> i128 {
        self.initial_total
    }

    /// Moves `amount` from `debit` to `credit`. Zero amounts are not recorded.
    pub fn post(&mut self, step: u64, debit: Account, credit: Account, amount: Money, kind: EntryKind) -> Option<&LedgerEntry> {
        if amount == 0 {
            return None;
        }
        *self.balances.entry(debit).or_insert(0) -= amount;
        *self.balances.entry(credit).or_insert(0) += amount;
        self.entries.push(LedgerEntry {
            step,
            debit,
            credit,
            amount,
            kind,
        });
        self.entries.last()
    }

    /// Consumption on a POI visit: `amount` from the person to `payee`.
    pub fn apply_consumption(&mut self, step: u64, person: PersonId, payee: Account, amount: Money) -> Option<&LedgerEntry> {
        if amount <= 0 {
            return None;
        }
        self.post(step, Account::Person(person), payee, amount, EntryKind::Consumption)
    }

    /// Gross wage from `employer`: tax to GOVERNMENT, remainder to the person.
    pub fn pay_wage(&mut self, step: u64, person: PersonId, employer: Account, gross: Money, tax_rate: Rate) -> usize {
        if gross <= 0 {
            return 0;
        }
        let tax = tax_rate.apply(gross);
        let net = gross - tax;
        let mut n = 0;
        n += usize::from(self.post(step, employer, Account::Person(person), net, EntryKind::Wage).is_some());
        n += usize::from(self.post(step, employer, Account::Government, tax, EntryKind::Tax).is_some());
        n
    }

    /// Interest on every positive person balance, paid by BANK.
    pub fn apply_interest(&mut self, step: u64, rate: Rate) -> usize {
        let due: Vec<(Account, Money)> = self
            .balances
            .iter()
            .filter(|(a, &b)| matches!(a, Account::Person(_)) && b > 0)
            .map(|(&a, &b)| (a, rate.apply(b)))
            .filter(|&(_, i)| i > 0)
            .collect();
        for &(a, i) in &due {
            self.post(step, Account::Bank, a, i, EntryKind::Interest);
        }
        due.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipients {
    Persons(Vec<PersonId>),
    Radius(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub id: u64,
    pub sender: PersonId,
    pub targets: Recipients,
    pub content: String,
    pub sent_step: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delivered_step: Option<u64>,
}

#[derive(Debug, Default)]
pub struct MessageBus {
    next_id: u64,
    queued: Vec<Message>,
    inbox: HashMap<PersonId, Vec<Message>>,
    delivered: u64,
}

impl MessageBus {
    pub fn queue(&mut self, sender: PersonId, targets: Recipients, content: String, step: u64) -> Result<u64> {
        if content.len() > MAX_CONTENT_BYTES {
            return Err(Error::ContentTooLarge(content.len()));
        }
        if let Recipients::Radius(r) = targets {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::BadConfig(format!("broadcast radius {r}")));
            }
        }
        self.next_id += 1;
        self.queued.push(Message {
            id: self.next_id,
            sender,
            targets,
            content,
            sent_step: step,
            delivered_step: None,
        });
        Ok(self.next_id)
    }

    /// Delivers everything queued. `positions` lists every person's
    /// position at delivery time; broadcasts reach those within the radius
    /// of the sender, excluding the sender.
    pub fn deliver(&mut self, delivered_step: u64, positions: &[(PersonId, Point)]) -> usize {
        let mut count = 0;
        let at: HashMap<PersonId, Point> = positions.iter().copied().collect();
        for mut m in std::mem::take(&mut self.queued) {
            m.delivered_step = Some(delivered_step);
            let recipients: Vec<PersonId> = match &m.targets {
                Recipients::Persons(ids) => ids.iter().copied().filter(|p| at.contains_key(p)).collect(),
                Recipients::Radius(r) => match at.get(&m.sender) {
                    Some(origin) => positions
                        .iter()
                        .filter(|(p, q)| *p != m.sender && origin.distance(q) <= *r)
                        .map(|(p, _)| *p)
                        .collect(),
                    None => Vec::new(),
                },
            };
            for p in recipients {
                self.inbox.entry(p).or_default().push(m.clone());
                count += 1;
            }
        }
        self.delivered += count as u64;
        count
    }

    pub fn inbox(&self, person: PersonId) -> &[Message] {
        self.inbox.get(&person).map_or(&[], Vec::as_slice)
    }

    pub fn pending(&self) -> usize {
        self.queued.len()
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }
}
