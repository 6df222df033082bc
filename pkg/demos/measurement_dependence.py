#!/usr/bin/env python3
# A local model can hit -2*sqrt(2) if the hidden variable knows the settings.

import math
from nonlocal_lab import bell

menu = bell.CANONICAL_MENU

m = bell.superdet_quantum(*menu)
print("lambda count:", m.lambda_count)
print("responses only see their own setting:", m.response_A(menu[0]), m.response_B(menu[2]))
print("S =", bell.chsh(m, *menu).S)

# how far the lambda distribution moves with the settings
rep = bell.si_report(m, menu)
print("tv_max      =", rep.tv_max, " (3*sqrt(2)/8 =", 3 * math.sqrt(2) / 8, ")")
print("mutual info =", rep.mutual_info, "bits")

# the three-state toy: one lambda is ruled out for some setting pairs
toy = bell.toy_three_state(*menu)
print("toy S:", bell.chsh(toy, *menu).S)
print("toy tv_max vs averaged:", bell.si_report(toy, menu).tv_max)
print("toy tv_max vs prior:   ", bell.si_report(toy, menu, reference="prior").tv_max)

# drop the dependence and it falls back under the bound
flat = bell.HiddenVariableModel("flat", m.prior, m.response_A, m.response_B)
print("same responses, independent lambda: S =", bell.chsh(flat, *menu).S)

try:
    bell.chsh(m, 0.1, *menu[1:])
except bell.UsageError as exc:
    print("off-menu angle:", exc)
