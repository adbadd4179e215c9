#!/usr/bin/env python3
"""
Diagnostic script to check the QNC pipeline and decoders on a small planted instance.
"""

import sys

import numpy as np

# Small deployment that keeps the oracle tractable
N_NODES = 10
N_EDGES = 40
SPARSITY = 0.2
BLOCK_LENGTH = 8
STOP_TIME = 6
SEED = 2024


def diagnose_decoders():
    """Run every stage once and report what works."""
    print(f"Testing QNC pipeline with n={N_NODES}, |E|={N_EDGES}, k/n={SPARSITY}, L={BLOCK_LENGTH}, T={STOP_TIME}")

    # 1. Imports
    try:
        print("\n1. Importing qnc_toolkit...")
        from qnc_toolkit import __version__
        from qnc_toolkit.bp_decoder import bp_decode
        from qnc_toolkit.decoders import exact_mmse_oracle, l1_decode, snr
        from qnc_toolkit.encoder import design_quantizers, generate_coefficients, simulate
        from qnc_toolkit.forwarding import simulate_forwarding
        from qnc_toolkit.measurement import build_measurement_system, linear_consistency_residual
        from qnc_toolkit.messages import random_orthonormal, sample_messages
        from qnc_toolkit.models import MessagePrior
        from qnc_toolkit.network import generate_deployment, shortest_paths
        from qnc_toolkit.whitening import whiten
        print(f"✓ qnc_toolkit {__version__} imported")
    except Exception as e:
        print(f"✗ Import failed: {str(e)}")
        print("Install the package with: pip install -e .")
        return 1

    # 2. Deployment and messages
    try:
        print("\n2. Sampling deployment and messages...")
        g = generate_deployment(N_NODES, N_EDGES, SEED)
        routing = shortest_paths(g)
        transform = random_orthonormal(N_NODES, SEED)
        prior = MessagePrior.from_sparsity(N_NODES, SPARSITY, spike_ratio=1e-3)
        ensemble = sample_messages(prior, transform, SEED)
        if not np.any(ensemble.x):
            ensemble = sample_messages(prior, transform, SEED + 1)
        x = ensemble.x
        print(f"✓ Gateway {g.gateway} with {len(g.gateway_in_edges)} in-edges, "
              f"max hop distance {routing.max_hop_distance}, support size {ensemble.support_size}")
    except Exception as e:
        print(f"✗ Sampling failed: {str(e)}")
        return 1

    # 3. QNC simulation and linear consistency
    try:
        print("\n3. Simulating QNC and checking the measurement model...")
        sched = generate_coefficients(g, STOP_TIME, SEED)
        quantizers = design_quantizers(sched, prior, BLOCK_LENGTH)
        trace = simulate(g, sched, quantizers, x)
        system = build_measurement_system(sched, g, quantizers)
        residual = linear_consistency_residual(system, trace, x)
        mark = "✓" if residual < 1e-9 else "✗"
        print(f"{mark} m={system.m} measurements, {trace.clip_count} clipped, relative residual {residual:.2e}")
        ws = whiten(system, trace.z_tot(), transform)
        print(f"  - {ws.floor_count} noise eigenvalues clamped")
    except Exception as e:
        print(f"✗ Simulation failed: {str(e)}")
        return 1

    # 4. Decoders
    print("\n4. Decoding...")
    decoders = {
        'oracle': lambda: exact_mmse_oracle(ws, prior),
        'bp': lambda: bp_decode(ws, prior),
        'l1': lambda: l1_decode(ws),
    }
    failures = 0
    for name, run in decoders.items():
        try:
            result = run()
            print(f"✓ {name}: SNR {snr(x, result.x_hat):.2f} dB, "
                  f"{result.iterations} iterations, converged={result.converged}")
        except Exception as e:
            failures += 1
            print(f"✗ {name} failed: {str(e)}")

    # 5. Packet forwarding baseline
    try:
        print("\n5. Packet forwarding baseline...")
        forwarded = simulate_forwarding(g, routing, x, BLOCK_LENGTH, prior)
        print(f"✓ Delay {forwarded.delay_channel_uses} channel uses "
              f"(QNC at T={STOP_TIME}: {BLOCK_LENGTH * (STOP_TIME - 1)}), SNR {snr(x, forwarded.x_hat):.2f} dB")
    except Exception as e:
        failures += 1
        print(f"✗ Forwarding failed: {str(e)}")

    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(diagnose_decoders())
