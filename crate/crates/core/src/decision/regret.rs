use super::{Label, UtilityModel};
use crate::scalar::Scalar;

/// Utility lost per state by taking a decision other than the state's best.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretTable<T> {
    pub states: Vec<Label>,
    pub decisions: Vec<Label>,
    /// Index of the best decision for each state.
    pub best: Vec<usize>,
    /// `entries[x][d] = U_p(x, best[x]) - U_p(x, d)`
    pub entries: Vec<Vec<T>>,
}

impl<T: Scalar> RegretTable<T> {
    pub fn get(&self, state: usize, decision: usize) -> &T {
        &self.entries[state][decision]
    }

    /// Largest single-cell loss; a rough measure of how unforgiving the
    /// domain is.
    pub fn max_regret(&self) -> T {
        self.entries
            .iter()
            .flatten()
            .fold(T::zero(), |m, v| if *v > m { v.clone() } else { m })
    }
}

pub fn regret_table<T: Scalar>(utility: &UtilityModel<T>) -> RegretTable<T> {
    let best: Vec<usize> = (0..utility.states().len())
        .map(|x| utility.best_decision(x))
        .collect();
    let entries = utility
        .table()
        .iter()
        .zip(&best)
        .map(|(row, &b)| row.iter().map(|u| row[b].clone() - u.clone()).collect())
        .collect();
    RegretTable {
        states: utility.states().to_vec(),
        decisions: utility.decisions().to_vec(),
        best,
        entries,
    }
}
