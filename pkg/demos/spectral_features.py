"""
From a window of EEG to a feature vector
========================================

Builds one 1-second, 20-channel window by hand and turns it into both
feature vectors: the log-magnitude spectrum and the channel-correlation
eigenfeatures.
"""

import numpy as np

from szclass.featurize import FeatureSpec, method1_features, method2_features
from szclass.numerics import fft_magnitude

fs = 250.0
t = np.arange(250) / fs
rng = np.random.default_rng(0)

# a 10 Hz rhythm on the first eight channels, noise everywhere
window = 0.5 * rng.standard_normal((20, 250))
window[:8] += 40 * np.sin(2 * np.pi * 10 * t)

spec = fft_magnitude(window[0], fs)
print("resolution %.2f Hz, strongest bin at %.1f Hz" % (spec.resolution, spec.freqs[np.argmax(spec.magnitudes[1:]) + 1]))

# method 1: log10 magnitudes on [1, 48) Hz, one row of 47 bins per channel
m1 = method1_features(window, fs, FeatureSpec(method=1, f_max=48))
print("method 1 vector:", m1.shape, "->", m1.reshape(20, 47).shape)

# method 2: correlations between channel spectra plus their eigenvalues
m2 = method2_features(window, fs, FeatureSpec(method=2, f_max=48))
upper, eig = m2[:190], m2[190:]
print("method 2 vector:", m2.shape)
print("largest eigenvalues:", np.round(eig[:3], 2))
print("channels 0 and 1 (both rhythmic) correlate at %.2f" % upper[0])
