//! `{Bx-Cy}` task schedules: `x` classes in the base task, `y` per increment.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Scenario {
    pub base: usize,
    pub increment: usize,
}

impl Scenario {
    pub fn new(base: usize, increment: usize) -> Self {
        Scenario { base, increment }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "B{}-C{}", self.base, self.increment)
    }
}

impl TryFrom<String> for Scenario {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Scenario> for String {
    fn from(s: Scenario) -> String {
        s.to_string()
    }
}

impl FromStr for Scenario {
    type Err = Error;

    /// Accepts `B4-C2`, `B4C2`, `b4-c2`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Schedule(format!("cannot parse scenario `{s}`, expected e.g. B4-C2"));
        let upper = s.trim().to_ascii_uppercase();
        let rest = upper.strip_prefix('B').ok_or_else(bad)?;
        let (base, inc) = rest.split_once('C').ok_or_else(bad)?;
        let base = base.trim_end_matches('-');
        Ok(Scenario {
            base: base.parse().map_err(|_| bad())?,
            increment: inc.parse().map_err(|_| bad())?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TaskSchedule {
    scenario: Scenario,
    /// Class indices per task, in lexicographic name order.
    tasks: Vec<Vec<usize>>,
    class_count: usize,
}

impl TaskSchedule {
    /// Partitions the classes, sorted lexicographically by name, into tasks.
    ///
    /// With `base == 0` the first task also receives `increment` classes.
    pub fn build(scenario: Scenario, class_names: &[String]) -> Result<Self> {
        let Scenario { base, increment } = scenario;
        let total = class_names.len();
        if increment == 0 {
            return Err(Error::Schedule("increment must be at least 1".into()));
        }
        if base > total {
            return Err(Error::Schedule(format!(
                "base task has {base} classes but only {total} exist"
            )));
        }
        if !(total - base).is_multiple_of(increment) {
            return Err(Error::Schedule(format!(
                "{scenario}: {} remaining classes are not divisible by {increment}",
                total - base
            )));
        }
        let mut order: Vec<usize> = (0..total).collect();
        order.sort_by(|&a, &b| class_names[a].cmp(&class_names[b]).then(a.cmp(&b)));

        let mut tasks = Vec::new();
        let mut rest = &order[..];
        if base > 0 {
            tasks.push(rest[..base].to_vec());
            rest = &rest[base..];
        }
        for chunk in rest.chunks(increment) {
            tasks.push(chunk.to_vec());
        }
        if tasks.is_empty() {
            return Err(Error::Schedule("schedule has no classes".into()));
        }
        Ok(TaskSchedule {
            scenario,
            tasks,
            class_count: total,
        })
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn task_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    /// Classes introduced by task `t` (0-based).
    pub fn task_classes(&self, t: usize) -> &[usize] {
        &self.tasks[t]
    }

    /// Classes of every task strictly before `t`.
    pub fn classes_before(&self, t: usize) -> Vec<usize> {
        self.tasks[..t].iter().flatten().copied().collect()
    }

    /// Classes of tasks `0..=t`.
    pub fn classes_through(&self, t: usize) -> Vec<usize> {
        self.tasks[..=t].iter().flatten().copied().collect()
    }

    pub fn task_sizes(&self) -> Vec<usize> {
        self.tasks.iter().map(Vec::len).collect()
    }

    /// Task index that introduced `class`.
    pub fn task_of(&self, class: usize) -> Option<usize> {
        self.tasks.iter().position(|t| t.contains(&class))
    }
}
