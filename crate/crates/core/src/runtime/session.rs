//! Two-party execution: Alice performs her rounds and announces each outcome,
//! Bob follows the announcements down the tree and measures once.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{session_rng, ExecutionPlan, NodeKind, Outcome, Sampler};
use crate::compiler::Protocol;
use crate::error::{Error, Result};
use crate::tensor::DensityMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Party {
    #[serde(rename = "A")]
    Alice,
    #[serde(rename = "B")]
    Bob,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    RoundOutcome,
    FinalLabel,
}

/// One wire record.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub seq: u64,
    pub from: Party,
    #[serde(rename = "type")]
    pub kind: MessageKind,
    pub round: u64,
    pub value: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transcript {
    pub seed: u64,
    pub session: u64,
    pub messages: Vec<Message>,
    pub label: usize,
}

impl Transcript {
    /// Number of Alice → Bob messages.
    pub fn alice_messages(&self) -> usize {
        self.messages.iter().filter(|m| m.from == Party::Alice).count()
    }

    /// Contiguous sequence numbers from 0, only round outcomes from Alice,
    /// and a single final label from Bob in last position.
    pub fn check_one_way(&self) -> Result<()> {
        let n = self.messages.len();
        for (i, m) in self.messages.iter().enumerate() {
            if m.seq != i as u64 {
                return Err(Error::ProtocolViolation(format!("message {i} has seq {}", m.seq)));
            }
            let expected = if i + 1 == n {
                (Party::Bob, MessageKind::FinalLabel)
            } else {
                (Party::Alice, MessageKind::RoundOutcome)
            };
            if (m.from, m.kind) != expected {
                return Err(Error::ProtocolViolation(format!("message {i} is {:?} from {:?}", m.kind, m.from)));
            }
        }
        match self.messages.last() {
            Some(m) if m.value == self.label as u64 => Ok(()),
            _ => Err(Error::ProtocolViolation("transcript does not end with the final label".into())),
        }
    }

    /// Newline-delimited JSON, one message per line.
    pub fn to_ndjson(&self) -> String {
        self.messages.iter().map(|m| serde_json::to_string(m).expect("plain record") + "\n").collect()
    }

    pub fn parse_ndjson(text: &str) -> Result<Vec<Message>> {
        text.lines().filter(|l| !l.trim().is_empty()).map(|l| serde_json::from_str(l).map_err(Error::from)).collect()
    }
}

/// Steps through Alice-side embeddings without drawing.
fn skip_alice_embeds(plan: &ExecutionPlan, mut id: usize) -> usize {
    while let node @ super::PlanNode { kind: NodeKind::Embed, alice: true, .. } = &plan.nodes[id] {
        match node.outcomes[0] {
            Outcome::Child(c) => id = c,
            Outcome::Label(_) => break,
        }
    }
    id
}

fn is_alice_round(plan: &ExecutionPlan, id: usize) -> bool {
    let node = &plan.nodes[id];
    node.alice && node.is_round()
}

pub struct AliceMachine<'a> {
    sampler: &'a Sampler<'a>,
}

impl<'a> AliceMachine<'a> {
    pub fn new(sampler: &'a Sampler<'a>) -> Self {
        AliceMachine { sampler }
    }

    /// Performs every Alice round on the realized path and returns the
    /// announcements in order.
    pub fn run(&self, rng: &mut ChaCha8Rng) -> Result<Vec<Message>> {
        let plan = self.sampler.plan();
        let mut id = skip_alice_embeds(plan, 0);
        let mut messages = Vec::new();
        while is_alice_round(plan, id) {
            let k = self.sampler.draw(id, rng)?;
            messages.push(Message {
                seq: messages.len() as u64,
                from: Party::Alice,
                kind: MessageKind::RoundOutcome,
                round: messages.len() as u64,
                value: k as u64,
            });
            match plan.nodes[id].outcomes[k] {
                Outcome::Child(c) => id = skip_alice_embeds(plan, c),
                Outcome::Label(_) => return Err(Error::MalformedTree("Alice round ends in a label".into())),
            }
        }
        Ok(messages)
    }
}

pub struct BobMachine<'a> {
    sampler: &'a Sampler<'a>,
    cursor: usize,
    next_seq: u64,
    done: bool,
}

impl<'a> BobMachine<'a> {
    pub fn new(sampler: &'a Sampler<'a>) -> Self {
        BobMachine { sampler, cursor: skip_alice_embeds(sampler.plan(), 0), next_seq: 0, done: false }
    }

    /// Whether every Alice round on the path has been announced.
    pub fn ready(&self) -> bool {
        !is_alice_round(self.sampler.plan(), self.cursor)
    }

    pub fn receive(&mut self, msg: &Message) -> Result<()> {
        let violation = |what: String| Err(Error::ProtocolViolation(what));
        if self.done {
            return violation(format!("message {} after the final label", msg.seq));
        }
        if msg.from != Party::Alice || msg.kind != MessageKind::RoundOutcome {
            return violation(format!("Bob cannot accept {:?} from {:?}", msg.kind, msg.from));
        }
        if msg.seq != self.next_seq || msg.round != self.next_seq {
            return violation(format!("expected seq {}, got seq {} round {}", self.next_seq, msg.seq, msg.round));
        }
        if self.ready() {
            return violation(format!("unexpected round {} announcement", msg.round));
        }
        let plan = self.sampler.plan();
        let node = &plan.nodes[self.cursor];
        match node.outcomes.get(msg.value as usize) {
            Some(&Outcome::Child(c)) => self.cursor = skip_alice_embeds(plan, c),
            _ => return violation(format!("round {} has no outcome {}", msg.round, msg.value)),
        }
        self.next_seq += 1;
        Ok(())
    }

    /// Bob's local part: walks the remaining subtree and reports the label.
    pub fn finish(&mut self, rng: &mut ChaCha8Rng) -> Result<Message> {
        if !self.ready() {
            return Err(Error::ProtocolViolation(format!("round {} was never announced", self.next_seq)));
        }
        if self.done {
            return Err(Error::ProtocolViolation("Bob already reported".into()));
        }
        let label = self.sampler.run(self.cursor, rng)?;
        self.done = true;
        Ok(Message {
            seq: self.next_seq,
            from: Party::Bob,
            kind: MessageKind::FinalLabel,
            round: self.next_seq,
            value: label as u64,
        })
    }
}

/// Runs one session on stream `session` of `seed`; the realized label equals
/// run `session` of [`ExecutionPlan::sample_labels`] with the same seed.
pub fn run_two_party_session(protocol: &Protocol, rho: &DensityMatrix, seed: u64, session: u64) -> Result<Transcript> {
    let plan = ExecutionPlan::new(protocol)?;
    let sampler = plan.sampler(rho)?;
    run_session(&sampler, seed, session)
}

pub(crate) fn run_session(sampler: &Sampler<'_>, seed: u64, session: u64) -> Result<Transcript> {
    let mut rng = session_rng(seed, session);
    let alice = AliceMachine::new(sampler);
    let mut bob = BobMachine::new(sampler);
    let mut messages = alice.run(&mut rng)?;
    for m in &messages {
        bob.receive(m)?;
    }
    let last = bob.finish(&mut rng)?;
    messages.push(last);
    Ok(Transcript { seed, session, messages, label: last.value as usize })
}

impl ExecutionPlan {
    /// Sessions `0..count` under `seed`.
    pub fn sessions(&self, rho: &DensityMatrix, seed: u64, count: u64) -> Result<Vec<Transcript>> {
        let sampler = self.sampler(rho)?;
        (0..count).map(|i| run_session(&sampler, seed, i)).collect()
    }
}
