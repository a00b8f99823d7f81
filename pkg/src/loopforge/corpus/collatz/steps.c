int collatz_steps(int n, int limit, int *peak) {
    int steps = 0;
    int top = n;
    while (n != 1 && steps < limit) {
        if (n & 1)
            n = 3 * n + 1;
        else
            n = n >> 1;
        if (n > top)
            top = n;
        steps++;
    }
    *peak = top;
    return steps;
}
