use crate::error::{Error, Result};
use crate::model::{step, NoiseModel};
use crate::network::Network;
use crate::protocol::{protocol_action, PrivateInput, Protocol};
use crate::transcript::History;

/// The trivial simulator: every round of `protocol` is played `k` times in a
/// row and a listener keeps the first copy it hears. Returns the claimed
/// histories and the number of physical rounds, `k * T`.
pub fn simulate_by_repetition(
    network: &Network,
    protocol: &dyn Protocol,
    inputs: &[PrivateInput],
    noise: &NoiseModel,
    k: usize,
    payload_cap: usize,
) -> Result<(Vec<History>, usize)> {
    if k == 0 {
        return Err(Error::param("repetition factor must be at least 1"));
    }
    let n = network.len();
    let t_len = protocol.length();
    let mut histories = vec![History::new(); n];
    for t in 1..=t_len {
        let actions = (0..n)
            .map(|v| protocol_action(protocol, v, t, &inputs[v], histories[v].events(), payload_cap))
            .collect::<Result<Vec<_>>>()?;
        for j in 0..k {
            let round = ((t - 1) * k + j + 1) as u64;
            let faults = noise.fault_vector(n, round);
            for (v, got) in step(network, &actions, &faults)?.into_iter().enumerate() {
                if let Some(m) = got {
                    if histories[v].events().last().map(|e| e.round) != Some(t) {
                        histories[v].record(t, m);
                    }
                }
            }
        }
    }
    Ok((histories, k * t_len))
}
