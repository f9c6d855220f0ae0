"""Regenerate data/crop_surrogate.csv.

Stand-in for the public 2200-row crop-recommendation CSV: same header,
same 22 crops in the same row order, 100 rows each, every feature drawn
uniformly inside the per-crop range observed in the public file. Row 0
is copied verbatim from the public file.
"""
import csv
import random

# crop: (N, P, K, temperature, humidity, ph, rainfall) as (lo, hi) pairs
RANGES = {
    "rice": ((60, 99), (35, 60), (35, 45), (20.05, 26.93), (80.12, 84.97), (5.01, 7.87), (182.56, 298.56)),
    "maize": ((60, 100), (35, 60), (15, 25), (18.04, 26.55), (55.28, 74.83), (5.51, 7.00), (60.65, 109.75)),
    "chickpea": ((20, 60), (55, 80), (75, 85), (17.02, 21.00), (14.26, 19.97), (5.99, 8.87), (65.11, 94.78)),
    "kidneybeans": ((0, 40), (55, 80), (15, 25), (15.33, 24.92), (18.09, 24.97), (5.50, 6.00), (60.28, 149.74)),
    "pigeonpeas": ((0, 40), (55, 80), (15, 25), (18.32, 36.98), (30.40, 69.69), (4.55, 7.45), (90.05, 198.83)),
    "mothbeans": ((0, 40), (35, 60), (15, 25), (24.02, 31.99), (40.01, 64.96), (3.50, 9.94), (30.92, 74.44)),
    "mungbean": ((0, 40), (35, 60), (15, 25), (27.01, 29.91), (80.03, 89.99), (6.22, 7.20), (36.12, 59.87)),
    "blackgram": ((20, 60), (55, 80), (15, 25), (25.10, 34.95), (60.07, 69.96), (6.50, 7.78), (60.42, 74.92)),
    "lentil": ((0, 40), (55, 80), (15, 25), (18.06, 29.94), (60.09, 69.92), (5.92, 7.84), (35.03, 54.94)),
    "pomegranate": ((0, 40), (5, 30), (35, 45), (18.07, 24.96), (85.13, 94.99), (5.56, 7.20), (102.52, 112.48)),
    "banana": ((80, 120), (70, 95), (45, 55), (25.01, 29.91), (75.03, 84.98), (5.51, 6.49), (90.11, 119.85)),
    "mango": ((0, 40), (15, 40), (25, 35), (27.00, 35.99), (45.02, 54.96), (4.51, 6.97), (89.29, 100.81)),
    "grapes": ((0, 40), (120, 145), (195, 205), (8.83, 41.95), (80.02, 83.98), (5.51, 6.50), (65.01, 74.92)),
    "watermelon": ((80, 120), (5, 30), (45, 55), (24.04, 26.99), (80.03, 89.98), (6.00, 6.96), (40.13, 59.76)),
    "muskmelon": ((80, 120), (5, 30), (45, 55), (27.02, 29.94), (90.02, 94.96), (6.00, 6.78), (20.21, 29.87)),
    "apple": ((0, 40), (120, 145), (195, 205), (21.04, 23.99), (90.03, 94.92), (5.51, 6.50), (100.12, 124.98)),
    "orange": ((0, 40), (5, 30), (5, 15), (10.01, 34.91), (90.01, 94.96), (6.01, 7.99), (100.17, 119.69)),
    "papaya": ((31, 70), (46, 70), (45, 55), (23.01, 43.68), (90.04, 94.94), (6.50, 6.99), (40.35, 248.86)),
    "coconut": ((0, 40), (5, 30), (25, 35), (25.01, 29.87), (90.02, 99.98), (5.50, 6.47), (131.09, 225.63)),
    "cotton": ((100, 140), (35, 60), (15, 25), (22.00, 25.99), (75.01, 84.88), (5.80, 7.99), (60.65, 99.93)),
    "jute": ((60, 100), (35, 60), (35, 45), (23.09, 26.99), (70.88, 89.89), (6.00, 7.49), (150.24, 199.84)),
    "coffee": ((80, 120), (15, 40), (25, 35), (23.06, 27.92), (50.05, 69.95), (6.02, 7.49), (115.16, 199.47)),
}

FIRST_ROW = ["90", "42", "43", "20.87974371", "82.00274423", "6.502985292", "202.9355362", "rice"]


def main(path="data/crop_surrogate.csv", seed=2200):
    rng = random.Random(seed)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["N", "P", "K", "temperature", "humidity", "ph", "rainfall", "label"])
        w.writerow(FIRST_ROW)
        for crop, r in RANGES.items():
            for i in range(100):
                if crop == "rice" and i == 0:
                    continue
                row = [str(rng.randint(*r[j])) for j in range(3)]
                row += [f"{rng.uniform(*r[j]):.8f}" for j in range(3, 7)]
                w.writerow(row + [crop])


if __name__ == "__main__":
    main()
