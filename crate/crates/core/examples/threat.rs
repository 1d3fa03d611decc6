use hearth::devices::threat_schedule;
use hearth::orchestrator::{run_session, AgentBackend, CycleConfig};

fn main() {
    for faults in [Vec::new(), threat_schedule()] {
        let t = std::time::Instant::now();
        let (_s, report) = run_session(CycleConfig::default(), &faults, AgentBackend::default()).unwrap();
        print!("{}", report.to_text());
        println!("elapsed {:?}\n", t.elapsed());
    }
}
