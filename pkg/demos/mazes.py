"""
Mazes
=====

A wave from the start cell finds the shortest path in time proportional to
its length.  The recursive solver instead summarizes each block of the maze
by the distances between its border cells and merges four (or eight)
blocks at a time, so its time is bounded in terms of the maze size and
not the path length.
"""

from meshgrain import random_maze, solve_maze_2d, solve_maze_3d, wave_bfs
from meshgrain.formats import format_maze

maze = random_maze(2, 16, 0.75, seed=3)
wave = wave_bfs(maze)
result = solve_maze_2d(maze)
print("wave distance", wave.distance, "recursive distance", result.distance)
print(format_maze(maze, result.path))
print("charged time by level:", result.levels)

# the wave's time is the path length; the recursive time follows the
# border summaries instead, and at this size its constants still dominate
for seed in range(40):
    maze = random_maze(2, 32, 0.68, seed)
    wave, rec = wave_bfs(maze), solve_maze_2d(maze)
    if not wave.reachable:
        continue
    print(f"seed {seed}: distance {wave.distance}  wave time {wave.charged_time}  recursive time {rec.charged_time}")

# in 3-d the merge needs about n**4 processors; more processors shorten it
cube = random_maze(3, 16, 0.6, seed=5)
for c in (4, "9/2"):
    r = solve_maze_3d(cube, c)
    print(f"c={c}: distance {r.distance}  charged {r.charged_time}  processors {r.mesh_size_used}")
