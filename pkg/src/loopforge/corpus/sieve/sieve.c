int composite[256];

int sieve(int n) {
    int i;
    int j;
    int count = 0;
    for (i = 2; i < n; i++)
        composite[i] = 0;
    for (i = 2; i * i < n; i++) {
        if (composite[i] == 0) {
            for (j = i * i; j < n; j += i)
                composite[j] = 1;
        }
    }
    for (i = 2; i < n; i++)
        count += composite[i] == 0;
    return count;
}
