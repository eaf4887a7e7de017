"""Array-level statistics: yields, probit variability, capacitance and temperature fits."""
