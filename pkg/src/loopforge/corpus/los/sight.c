extern int grid[256];

/* walk the cells between (x, y) and (qx, qy); hit is set when a wall blocks the view */
int line_of_sight(int x0, int y0, int x1, int y1, int size) {
    int dx = x1 - x0;
    int dy = y0 - y1;
    int sx = 1;
    int sy = 1;
    int x = x0;
    int y = y0;
    int qx = x1;
    int qy = y1;
    int n;
    int err;
    int e2;
    int hit = 0;
    if (dx < 0) { dx = -dx; sx = -1; }
    if (dy > 0) { dy = -dy; sy = -1; }
    err = dx + dy;
    n = dx - dy + 1;
    while (n > 0) {
        if (x == qx && y == qy)
            break;
        hit = grid[y * size + x];
        if (hit)
            break;
        e2 = 2 * err;
        if (e2 >= dy) { err += dy; x += sx; }
        if (e2 <= dx) { err += dx; y += sy; }
        n--;
    }
    return hit;
}
