int items[32];

int bubble(int n) {
    int pass = 0;
    int swapped = 1;
    while (swapped) {
        int j;
        swapped = 0;
        for (j = 0; j + 1 < n - pass; j++) {
            int a = items[j];
            int b = items[j + 1];
            if (a > b) {
                items[j] = b;
                items[j + 1] = a;
                swapped = 1;
            }
        }
        pass++;
    }
    return pass;
}
