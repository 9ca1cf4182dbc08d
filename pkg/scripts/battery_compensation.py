#!/usr/bin/env python3
"""Quantify how the sliding battery cancels arm centre-of-mass motion.

Sweeps each arm joint through its range (others held at the inspection
home posture) and reports the x-excursion of the combined arm+battery
centre of mass with the carriage active versus parked.
"""

import argparse

import numpy as np

from uamsim.arm import arm_com_x, battery_setpoint, combined_com_x
from uamsim.config import default_config


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--points", type=int, default=201,
                        help="samples per joint sweep (default: %(default)s)")
    args = parser.parse_args(argv)

    config = default_config()
    arm, carriage = config.arm, config.carriage
    home = config.mission.home_q
    parked = config.home_battery_x()

    print(f"carriage gain {carriage.gain:.4f} (= -m_arm/m_batt), "
          f"travel ±{carriage.travel} m, parked at {parked:.4f} m")
    header = f"{'joint':>5} {'active [m]':>12} {'parked [m]':>12} {'reduction':>10} {'saturated':>10}"
    print(header)
    print("-" * len(header))
    for joint in range(arm.dof):
        active, parked_com = [], []
        n_saturated = 0
        for value in np.linspace(arm.joint_lower[joint],
                                 arm.joint_upper[joint], args.points):
            q = home.copy()
            q[joint] = value
            _, saturated = battery_setpoint(carriage, arm_com_x(arm, q))
            n_saturated += saturated
            active.append(combined_com_x(arm, carriage, q))
            parked_com.append(combined_com_x(arm, carriage, q,
                                             battery_x=parked))
        ptp_active = np.ptp(active)
        ptp_parked = np.ptp(parked_com)
        reduction = 1.0 - ptp_active / ptp_parked if ptp_parked else float("nan")
        print(f"{joint:>5} {ptp_active:>12.3e} {ptp_parked:>12.3e} "
              f"{reduction:>9.1%} {n_saturated:>5}/{args.points}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
