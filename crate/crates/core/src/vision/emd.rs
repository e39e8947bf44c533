//! Exact Earth Mover's Distance as a min-cost transportation problem,
//! solved by successive shortest augmenting paths.

/// Residual masses at or below this are treated as exhausted.
const MASS_EPS: f64 = 1e-15;
const DIST_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    /// Row-major `supply.len() x demand.len()` flows.
    pub flow: Vec<f64>,
    pub cost: f64,
}

/// Minimum-cost transport of `supply` onto `demand` under the ground cost
/// `cost(i, j)`.
///
/// The two mass vectors are expected to carry the same total; if they do not,
/// the smaller total is shipped. Costs must be non-negative.
pub fn transport(supply: &[f64], demand: &[f64], cost: impl Fn(usize, usize) -> f64) -> TransportPlan {
    let (m, n) = (supply.len(), demand.len());
    let c: Vec<f64> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| cost(i, j)).collect();
    let mut left_s: Vec<f64> = supply.to_vec();
    let mut left_d: Vec<f64> = demand.to_vec();
    let mut flow = vec![0f64; m * n];

    let mut dist_s = vec![0f64; m];
    let mut dist_d = vec![0f64; n];
    // predecessor of a sink is a source; predecessor of a source (when reached
    // through a reverse edge) is a sink
    let mut pred_d = vec![usize::MAX; n];
    let mut pred_s = vec![usize::MAX; m];

    loop {
        if left_s.iter().all(|&v| v <= MASS_EPS) || left_d.iter().all(|&v| v <= MASS_EPS) {
            break;
        }
        for i in 0..m {
            dist_s[i] = if left_s[i] > MASS_EPS { 0.0 } else { f64::INFINITY };
            pred_s[i] = usize::MAX;
        }
        dist_d.iter_mut().for_each(|d| *d = f64::INFINITY);
        pred_d.iter_mut().for_each(|p| *p = usize::MAX);

        // Bellman-Ford on the bipartite residual graph.
        for _round in 0..=(m + n) {
            let mut changed = false;
            for i in 0..m {
                if !dist_s[i].is_finite() {
                    continue;
                }
                for j in 0..n {
                    let nd = dist_s[i] + c[i * n + j];
                    if nd < dist_d[j] - DIST_EPS {
                        dist_d[j] = nd;
                        pred_d[j] = i;
                        changed = true;
                    }
                }
            }
            for j in 0..n {
                if !dist_d[j].is_finite() {
                    continue;
                }
                for i in 0..m {
                    if flow[i * n + j] > MASS_EPS {
                        let nd = dist_d[j] - c[i * n + j];
                        if nd < dist_s[i] - DIST_EPS {
                            dist_s[i] = nd;
                            pred_s[i] = j;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }

        let Some(sink) = (0..n)
            .filter(|&j| left_d[j] > MASS_EPS && dist_d[j].is_finite())
            .min_by(|&a, &b| dist_d[a].total_cmp(&dist_d[b]))
        else {
            break;
        };

        // Walk back to find the bottleneck.
        let mut bottleneck = left_d[sink];
        let mut j = sink;
        let source = loop {
            let i = pred_d[j];
            match pred_s[i] {
                usize::MAX => break i,
                prev_j => {
                    bottleneck = bottleneck.min(flow[i * n + prev_j]);
                    j = prev_j;
                }
            }
        };
        bottleneck = bottleneck.min(left_s[source]);

        let mut j = sink;
        loop {
            let i = pred_d[j];
            flow[i * n + j] += bottleneck;
            match pred_s[i] {
                usize::MAX => break,
                prev_j => {
                    flow[i * n + prev_j] -= bottleneck;
                    if flow[i * n + prev_j] < MASS_EPS {
                        flow[i * n + prev_j] = 0.0;
                    }
                    j = prev_j;
                }
            }
        }
        left_s[source] -= bottleneck;
        left_d[sink] -= bottleneck;
    }

    let cost = flow.iter().zip(&c).map(|(f, c)| f * c).sum();
    TransportPlan { flow, cost }
}

/// EMD between two equal-mass histograms; zero-mass bins are skipped before
/// solving.
pub fn emd(a: &[f64], b: &[f64], ground: impl Fn(usize, usize) -> f64) -> f64 {
    let src: Vec<usize> = (0..a.len()).filter(|&i| a[i] > 0.0).collect();
    let dst: Vec<usize> = (0..b.len()).filter(|&j| b[j] > 0.0).collect();
    let supply: Vec<f64> = src.iter().map(|&i| a[i]).collect();
    let demand: Vec<f64> = dst.iter().map(|&j| b[j]).collect();
    transport(&supply, &demand, |i, j| ground(src[i], dst[j])).cost
}
