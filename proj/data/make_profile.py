import math, sys
# Synthetic residential load shape: flat base, morning bump near 07:30, midday
# shoulder and a single evening peak at 19:30, normalized so the peak is 1.
# Usage: python3 make_profile.py [evening_sigma_minutes] > residential_profile.csv
sig_e = float(sys.argv[1]) if len(sys.argv) > 1 else 60.0
def raw(m):
    def g(c, s):
        d = min(abs(m - c), 1440 - abs(m - c))
        return math.exp(-0.5 * (d / s) ** 2)
    return 0.42 + 0.14 * g(450, 80) + 0.06 * g(780, 180) + 0.52 * g(1170, sig_e)
peak = raw(1170)
print("minute,normalized_kw")
for m in range(0, 1440, 5):
    print(f"{m},{raw(m)/peak:.6f}")
