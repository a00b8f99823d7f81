extern int items[32];
int bubble(int n);

int main(int seed, int n) {
    int i;
    int check = 0;
    n = n & 31;
    for (i = 0; i < n; i++) {
        seed = seed * 214013 + 2531011;
        items[i] = (seed >> 16) & 1023;
    }
    check = bubble(n);
    for (i = 0; i < n; i++)
        check = check * 31 + items[i];
    return check;
}
