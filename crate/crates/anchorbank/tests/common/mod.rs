#![allow(dead_code)]

use anchorbank::anchorbank_core::bank_builder::BuildOutput;
use anchorbank::anchorbank_core::Simulator;
use anchorbank::harness::SimSetup;
use anchorbank::storage::BankFile;

pub fn small_setup() -> SimSetup {
    SimSetup::new(300, 5.0, 60)
}

pub fn small_build(seed: u64) -> (Simulator, BuildOutput, BankFile) {
    let setup = small_setup();
    let (sim, out) = setup.build(seed).unwrap();
    let mut file = BankFile::new(out.bank.clone(), setup.provenance(seed));
    file.round_one = Some(out.graph.clone());
    (sim, out, file)
}
