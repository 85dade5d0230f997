"""Print how fast the one-shot inflation factor approaches its asymptote.

For each ensemble half-size alpha the gap theta - alpha/(alpha-1) decays as
(r / (S p0))^(alpha - 1), so small ensembles approach the asymptote very
slowly.  Output: CSV on stdout, one row per (alpha, S p0 / r) pair.
"""

import sys

from filterlab.spenkf import theta_star, theta_step


def main():
    print("alpha,S_p0_over_r,theta,theta_star,gap")
    for alpha in (1.5, 2.0, 4.0, 8.0, 50.0):
        star = theta_star(alpha)
        for exponent in range(0, 13, 2):
            s = 10.0 ** exponent
            th = theta_step(alpha, s, 1.0, 1.0)
            print("%.17g,%.17g,%.17g,%.17g,%.17g"
                  % (alpha, s, th, star, star - th))
    return 0


if __name__ == "__main__":
    sys.exit(main())
