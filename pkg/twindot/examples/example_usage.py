"""
TWINDOT Example Usage
Walks through the library from a parameter preset to reflectivity and g2
"""

import numpy as np

from twindot.core.data_models import ScanSpec, TargetState
from twindot.core.dynamics import g2_reflected, steady_state_of
from twindot.core.effective import collective_rates, modes_of, tune_to_mode
from twindot.core.experiments import ScanEngine, reflectivity
from twindot.core.model import dipole_coupling, drive_amplitude, load_preset


def describe_pair(fock_dim: int = 6):
    """
    Dipole-dipole rates, effective modes and the linear reflectivity of case d

    Args:
        fock_dim: cavity truncation for the master-equation solves
    """
    print("=" * 80)
    print("TWINDOT EXAMPLE")
    print("=" * 80)
    print()

    Omega12, gamma12 = dipole_coupling(10.0, 930.0, 3.6, 0.6)
    print(f"Dots 10 nm apart: Omega12 = {Omega12:.2f} µeV, gamma12 = {gamma12:.3f} µeV")
    print()

    params = load_preset("case-d").replace(fock_dim=fock_dim)
    print(f"Preset case-d: Delta12 = {params.delta12:.1f} µeV, g = {params.g} µeV, "
          f"kappa = {params.kappa} µeV")
    print(f"Drive amplitude at {params.P_laser:.0e} W: {drive_amplitude(params):.4f} µeV")
    print()

    print("-" * 80)
    print("STEP 1: Effective eigenmodes")
    print("-" * 80)
    for mode in modes_of(params).modes:
        print(f"{mode.tag.value:>7}: position {mode.position:8.3f} µeV, "
              f"linewidth {mode.linewidth:7.3f} µeV, cavity weight {mode.cavity_weight:.3f}")
    rates = collective_rates(params)
    print(f"mu = {rates.mu:.3f}, nu = {rates.nu:.3f}, "
          f"Gamma_- = {rates.Gamma_minus:.3f} µeV, n_c(-'') = {rates.nc_minus:.2e}")
    print()

    print("-" * 80)
    print("STEP 2: Steady state on the |-''> resonance")
    print("-" * 80)
    tuned = tune_to_mode(params, TargetState.MINUS_DD)
    rho = steady_state_of(tuned)
    print(f"Tuned cavity and laser to {tuned.omega_L:.3f} µeV")
    print(f"Purity {rho.purity():.6f}, reflectivity {reflectivity(tuned):.4f}")
    print()

    print("-" * 80)
    print("STEP 3: Reflected-light g2")
    print("-" * 80)
    tau = np.linspace(0.0, 5.0, 11)
    g2 = g2_reflected(tuned.replace(fock_dim=4), tau)
    for t, value in zip(tau, g2):
        print(f"  tau = {t:4.1f} ns  g2 = {value:.4f}")
    print()

    print("-" * 80)
    print("STEP 4: Saturation curve")
    print("-" * 80)
    spec = ScanSpec(params=params, axis="P_laser",
                    grid=[float(p) for p in np.geomspace(1e-13, 1e-8, 11)],
                    target=TargetState.MINUS_DD, check_convergence=False)
    result = ScanEngine(jobs=2).power_scan(spec)
    for P, R in zip(result.column("P_laser_W"), result.column("reflectivity")):
        print(f"  P = {P:.1e} W  R = {R:.4f}")
    print(f"P50 = {result.metadata['p50_W']}")


if __name__ == "__main__":
    describe_pair()
