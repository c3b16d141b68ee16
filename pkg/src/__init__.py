"""Rate and energy-efficiency simulation of multiuser mmWave receivers with low-resolution ADCs."""
