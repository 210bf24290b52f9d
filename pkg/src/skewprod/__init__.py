"""Step skew products of interval diffeomorphisms over the Bernoulli shift."""
