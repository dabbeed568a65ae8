use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::types::{Transaction, TxId};
use crate::hierarchy::ChainPath;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SettlementError {
    #[error("{0} stays within its chain and needs no settlement")]
    SameChain(TxId),
}

/// Coincident links a cross-chain transfer needs before it is credited.
///
/// Link 1 is a block shared by the origin chain and the relay chain at or
/// after the commit block; it is trivially met when the origin is the relay.
/// Link 2, present when the destination lies below the relay, is a later
/// block shared by the destination chain and the relay.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettlementCondition {
    pub tx: TxId,
    pub relay: ChainPath,
    /// Chains whose shared block forms link 1; `None` when trivially met.
    pub link1: Option<(ChainPath, ChainPath)>,
    /// Chains whose shared block forms link 2, if required.
    pub link2: Option<(ChainPath, ChainPath)>,
}

impl SettlementCondition {
    pub fn links(&self) -> usize {
        self.link1.is_some() as usize + self.link2.is_some() as usize
    }
}

pub fn settlement_condition_for(tx: &Transaction) -> Result<SettlementCondition, SettlementError> {
    if !tx.is_cross_chain() {
        return Err(SettlementError::SameChain(tx.id));
    }
    let relay = tx.ancestor();
    Ok(SettlementCondition {
        tx: tx.id,
        relay,
        link1: (tx.origin != relay).then_some((tx.origin, relay)),
        link2: (tx.destination != relay).then_some((tx.destination, relay)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{AccountId, AssetId};

    fn tx(o: &str, d: &str) -> Transaction {
        Transaction {
            id: TxId(1),
            origin: o.parse().unwrap(),
            destination: d.parse().unwrap(),
            asset: AssetId(1),
            sender: AccountId(1),
            new_owner: AccountId(2),
            injected_time: 0.0,
        }
    }

    fn p(s: &str) -> ChainPath {
        s.parse().unwrap()
    }

    #[test]
    fn cross_branch_needs_two_links() {
        let c = settlement_condition_for(&tx("1.1.1", "1.2.2")).unwrap();
        assert_eq!(c.relay, ChainPath::ROOT);
        assert_eq!(c.link1, Some((p("1.1.1"), ChainPath::ROOT)));
        assert_eq!(c.link2, Some((p("1.2.2"), ChainPath::ROOT)));
    }

    #[test]
    fn upward_needs_one_link() {
        let c = settlement_condition_for(&tx("1.1.1", "1")).unwrap();
        assert_eq!(c.relay, ChainPath::ROOT);
        assert_eq!(c.links(), 1);
        assert_eq!(c.link2, None);
    }

    #[test]
    fn downward_link1_is_trivial() {
        let c = settlement_condition_for(&tx("1.1", "1.1.2")).unwrap();
        assert_eq!(c.relay, p("1.1"));
        assert_eq!(c.link1, None);
        assert_eq!(c.link2, Some((p("1.1.2"), p("1.1"))));
    }

    #[test]
    fn same_chain_is_an_error() {
        assert!(settlement_condition_for(&tx("1.2", "1.2")).is_err());
    }
}
