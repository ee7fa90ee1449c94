"""
Key distribution with an entangled pair
=======================================

Alice and Bob each pick a quadrature per slot. Matching choices give
correlated values and hence key bits. A beamsplitter tap on Bob's arm
raises the conditional variance, which is how the tap is noticed.
"""

from fibresqueeze import scenarios
from fibresqueeze.qkd import ChannelSpec, detect_eavesdropper, raw_bit_rate, run_session, sift_key

s = scenarios.builtin_scenarios()["qkd-clean"]
pair = scenarios.squeezed_pair(s, scenarios.build_objects(s))

clean = run_session(pair, ChannelSpec(), 4000, seed=1)
key = sift_key(clean)
print("sift rate %.3f, %d bits, keys agree: %s" % (key.sift_rate, key.key_length, key.alice_key == key.bob_key))
print("raw rate at 82 MHz: %.3g bit/s" % raw_bit_rate(82e6, key.sift_rate))

for tap in (1.0, 0.8, 0.5):
    check = detect_eavesdropper(run_session(pair, ChannelSpec(tap=tap), 4000, seed=2))
    print("tap %.1f: estimates %s, threshold %.3f, flag %s"
          % (tap, tuple(round(e, 3) for e in check.estimates), check.threshold, check.flag))
