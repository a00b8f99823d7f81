extern int keys[200];

/* position of the first key equal to target, -1 at a sentinel (0), -2 when absent */
int find(int target, int limit) {
    int i = 0;
    int pos = -2;
    while (i < limit) {
        int k = keys[i];
        if (k == target) {
            pos = i;
            break;
        }
        if (k == 0) {
            pos = -1;
            break;
        }
        i++;
    }
    return pos;
}
