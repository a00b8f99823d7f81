int collatz_steps(int n, int limit, int *peak);

int main(int start, int count) {
    int total = 0;
    int peak;
    int i;
    start = (start & 1023) + 1;
    count = count & 7;
    for (i = 0; i <= count; i++) {
        total += collatz_steps(start + i, 300, &peak);
        total ^= peak;
    }
    return total;
}
