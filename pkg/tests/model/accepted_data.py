# accepted results for the six-point toy data set
# P = {(1,100), (2,40), (3,0), (15,50), (16,50), (17,50)}, gamma = 2,
# zero grid origin.

# g_aggregate output as (x, y, w), in cell order
TOY_G_AGGREGATE = [(1.5, 70.0, 2.0),
                   (3.0, 0.0, 1.0),
                   (15.5, 50.0, 2.0),
                   (17.0, 50.0, 1.0)]

# occupied cells of the toy data and their empty Moore neighbors
TOY_OCCUPIED = {(0,), (1,), (7,), (8,)}
TOY_EMPTY_NEIGHBORS = {(-1,), (2,), (6,), (9,)}

# aggregate_neighbor adds the centers of the empty neighbor cells
TOY_NEIGHBOR_CENTERS = [-1.0, 5.0, 13.0, 19.0]

# reg over P with sigma = 1 (exponent denominator 2 sigma^2) at selected
# locations, (x, value, absolute tolerance)
TOY_REG_SIGMA1 = [(13.0, 50.0, 1e-9),
                  (5.0, 3.2559, 1e-3),
                  (-2.06, 98.3124, 5e-3)]

# rows of the coreset file written by
#   build --method ga --gamma 2 --in toy.csv
TOY_G_AGGREGATE_ROWS = ['x1,y,w',
                        '1.5,70,2',
                        '3,0,1',
                        '15.5,50,2',
                        '17,50,1']

# sample_size_bound(0.1, 0.1, 0.1, 1)
SAMPLE_SIZE_BOUND = 52984
