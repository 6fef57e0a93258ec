# Plain and dueling Q networks, checked against finite differences.
import numpy as np

from highway_overtake import neural

rng = np.random.default_rng(0)
mlp = neural.init_mlp([23, 128, 128, 5], rng)
duel = neural.init_dueling(23, 5, rng)
print(mlp.layer_dims, duel.trunk.layer_dims, duel.value.layer_dims, duel.advantage.layer_dims)

x = rng.normal(size=23)
print(np.round(neural.forward(mlp, x)[0], 4))
print(np.round(neural.forward(duel, x)[0], 4))

# max-form aggregation: best action keeps the state value, others sit below it
v, a = 1.0, np.array([0.5, 0.2, 0.5])
q = neural.dueling_aggregate(v, a)
print(q, q.max() == v, neural.argmax_action(q))

# gradient check on a small dueling net
small = neural.init_dueling(3, 4, rng, width=5)
small = small.with_arrays([p + rng.normal(0, 0.1, p.shape) for p in small.arrays()])
x = rng.normal(size=3)
c = rng.normal(size=4)
_, cache = neural.forward(small, x)
analytic = neural.backward(small, cache, c).arrays()
h = 1e-5
w = small.arrays()[0]
numeric = np.zeros_like(w)
for idx in np.ndindex(w.shape):
    old = w[idx]
    w[idx] = old + h
    fp = c @ neural.forward(small, x)[0]
    w[idx] = old - h
    fm = c @ neural.forward(small, x)[0]
    w[idx] = old
    numeric[idx] = (fp - fm) / (2 * h)
print(np.abs(analytic[0] - numeric).max())

# TD target and the loss the agents minimise
print(neural.td_target(1.0, [0.0, 2.0], 0.8, False), neural.td_target(-1.0, [9.0], 0.8, True))
print(neural.mse_loss([0.0, 0.0], [1.0, 3.0]))
